"""Command-line interface: scenario simulation, equilibrium solving, metrics.

Exit codes: 0 success, 2 config/input error, 3 I/O error, 4 solver
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ScenarioConfig, validate
from .equilibrium import (
    SolverError,
    equilibrium_win_prob,
    expected_revenue,
    power_pair,
    solve_equilibrium,
    verify_equilibrium,
)
from .fairness import hhi, profit_margin
from .runner import (
    build_scenario,
    run_ensemble,
    write_ensemble_json,
    write_trajectories_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4


@dataclass
class RunManifest:
    """Reproducibility record written next to every command's outputs."""

    version: str
    config_digest: str
    seed: int | None
    started: str
    finished: str
    outputs: list[str]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "started": self.started,
            "finished": self.finished,
            "outputs": self.outputs,
        }

    def write(self, path: Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _parse_override_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _load_config(args) -> ScenarioConfig:
    overrides = {}
    for item in args.override or []:
        if "=" not in item:
            raise ConfigError([f"override {item!r} is not of the form key=value"])
        key, _, raw = item.partition("=")
        overrides[key.strip()] = _parse_override_value(raw.strip())
    if args.seed is not None:
        overrides["seed"] = int(args.seed)

    if args.scenario is not None:
        return build_scenario(args.scenario, overrides)
    if args.config is None:
        raise ConfigError(["either a config file or --scenario is required"])
    with open(args.config, "rb") as fh:
        d = tomllib.load(fh)
    for path, value in overrides.items():
        _apply_dotted(d, path, value)
    return validate(ScenarioConfig.from_dict(d))


def _apply_dotted(d, path: str, value) -> None:
    parts = path.split(".")
    node = d
    for p in parts[:-1]:
        node = node[int(p)] if isinstance(node, list) else node.setdefault(p, {})
    if isinstance(node, list):
        node[int(parts[-1])] = value
    else:
        node[parts[-1]] = value


def cmd_simulate(args) -> int:
    started = _now()
    try:
        config = _load_config(args)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            for v in exc.violations:
                print(v, file=sys.stderr)
        else:
            print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO

    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        by_rep = {}
        result = run_ensemble(config, workers=args.workers,
                              trajectory_sink=lambda t: by_rep.__setitem__(t.repetition, t))
        trajectories = [by_rep[rep] for rep in range(config.repetitions)]
        traj_path = out / "trajectories.csv"
        ens_path = out / "ensemble.json"
        write_trajectories_csv(trajectories, traj_path)
        write_ensemble_json(result, ens_path)
        manifest = RunManifest(
            version=__version__,
            config_digest=config.digest(),
            seed=config.seed,
            started=started,
            finished=_now(),
            outputs=[traj_path.name, ens_path.name],
        )
        manifest.write(out / "manifest.json")
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO

    fr = result.fairness
    print(f"scenario {config.kind}: {config.repetitions} repetitions x {config.rounds} rounds")
    print(f"fairness satisfied={fr.satisfied} empirical_prob={fr.empirical_prob:.4f} "
          f"interval=[{fr.fair_low:.4f}, {fr.fair_high:.4f}]")
    print(f"absorbed {result.absorbed_count}/{config.repetitions}"
          + (f", median round {result.absorption_median:.0f}" if result.absorption_median is not None else ""))
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    started = _now()
    if args.m < 1 or args.n < 1:
        print("m and n must be positive integers", file=sys.stderr)
        return EXIT_CONFIG
    dist_i, dist_j = power_pair(max(args.m, args.n), min(args.m, args.n))
    try:
        eq = solve_equilibrium(dist_i, dist_j, reserve=args.reserve,
                               grid_size=args.grid)
        revenue = expected_revenue(eq, max(args.m, args.n), min(args.m, args.n))
        report = verify_equilibrium(eq, dist_i, dist_j)
        win_p, win_se = equilibrium_win_prob(eq, dist_i, dist_j)
    except SolverError as exc:
        print(exc, file=sys.stderr)
        for line in getattr(exc, "history", []):
            print(line, file=sys.stderr)
        return EXIT_SOLVER

    try:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        eq_path = out / "equilibrium.txt"
        eq.save(eq_path)
        rep_path = out / "equilibrium_report.json"
        payload = {
            "m": args.m,
            "n": args.n,
            "reserve": args.reserve,
            "b_low": eq.b_low,
            "b_high": eq.b_high,
            "residual_max": eq.residual_max,
            "revenue": revenue,
            "strong_win_prob": win_p,
            "strong_win_prob_se": win_se,
            "dominance_ok": report.dominance_ok,
            "best_response_ok": report.best_response_ok,
            "failures": list(report.failures),
        }
        with open(rep_path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
        manifest = RunManifest(
            version=__version__,
            config_digest="",
            seed=None,
            started=started,
            finished=_now(),
            outputs=[eq_path.name, rep_path.name],
        )
        manifest.write(out / "manifest.json")
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO

    print(f"equilibrium (m={args.m}, n={args.n}, r={args.reserve}): "
          f"b_high={eq.b_high:.6f} residual_max={eq.residual_max:.2e}")
    print(f"revenue={revenue:.6f} strong_win_prob={win_p:.4f}")
    print(f"outputs in {out}")
    return EXIT_OK


REQUIRED_METRIC_COLUMNS = ("builder", "blocks", "market_share",
                           "total_payments", "total_block_value")


def cmd_metrics(args) -> int:
    try:
        with open(args.input, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or any(
                c not in reader.fieldnames for c in REQUIRED_METRIC_COLUMNS
            ):
                print(f"{args.input}: expected columns {REQUIRED_METRIC_COLUMNS}",
                      file=sys.stderr)
                return EXIT_CONFIG
            rows = list(reader)
    except OSError as exc:
        print(exc, file=sys.stderr)
        return EXIT_IO
    if not rows:
        print(f"{args.input}: no data rows", file=sys.stderr)
        return EXIT_CONFIG

    try:
        shares = np.array([float(r["market_share"]) for r in rows])
        index = hhi(shares, tol=args.share_sum_tol)
    except (KeyError, ValueError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG

    print(f"HHI = {index:.6f} over {len(rows)} builders "
          f"(share sum {shares.sum():.4f})")
    print(f"margins ({args.method}):")
    for r in rows:
        try:
            value = float(r["total_block_value"])
            payment = float(r["total_payments"])
            margin = profit_margin(value, payment, method=args.method)
        except ValueError as exc:
            print(f"{r['builder']}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        flag = ""
        provided = r.get("margin_pct")
        if provided not in (None, ""):
            gap = abs(margin * 100.0 - float(provided))
            if gap > 1.0:
                flag = f"  [differs from provided {float(provided):.2f}% by {gap:.2f} pp]"
        print(f"  {r['builder']}: {margin * 100.0:.2f}%{flag}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbsim",
        description="Block-builder market simulator and auction analysis",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario ensemble")
    sim.add_argument("config", nargs="?", default=None,
                     help="TOML scenario config (alternative to --scenario)")
    sim.add_argument("--scenario", choices=ScenarioConfig.KINDS, default=None,
                     help="built-in scenario preset")
    sim.add_argument("--seed", type=int, default=None, help="master seed override")
    sim.add_argument("--out", default="out", help="output directory")
    sim.add_argument("--override", action="append", default=[],
                     metavar="KEY=VALUE", help="dotted-path config override")
    sim.add_argument("--workers", type=int, default=1,
                     help="worker threads for repetitions")
    sim.set_defaults(func=cmd_simulate)

    eqp = sub.add_parser("equilibrium", help="solve the asymmetric auction equilibrium")
    eqp.add_argument("--m", type=int, required=True, help="strong cartel size")
    eqp.add_argument("--n", type=int, required=True, help="weak cartel size")
    eqp.add_argument("--reserve", type=float, default=0.0)
    eqp.add_argument("--grid", type=int, default=2048, help="bid grid size")
    eqp.add_argument("--out", default="out", help="output directory")
    eqp.set_defaults(func=cmd_equilibrium)

    met = sub.add_parser("metrics", help="HHI and profit margins from a builders CSV")
    met.add_argument("--input", required=True, help="builder statistics CSV")
    met.add_argument("--method", default="value_relative", help="margin method")
    met.add_argument("--share-sum-tol", type=float, default=0.05,
                     help="allowed deviation of the share sum from 1")
    met.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
