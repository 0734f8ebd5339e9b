"""Command-line entry point: ``fsmca run|sweep|compare|recommend-scale``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evaluation
from .mca import McaConfig
from .plant import make_plant
from .scaling import recommend_scale
from .scenarios import ScenarioError, get_scenario

log = logging.getLogger("fsmca")


class CliError(Exception):
    pass


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return v


def _horizon_list(text: str) -> list[int]:
    return [_positive_int(p) for p in text.replace(" ", "").split(",") if p]


def load_config(path) -> dict:
    """Flat JSON object keyed by parameter name, e.g. ``{"w_fspec": 5, "omega_max": 3}``."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise CliError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise CliError(f"{path}: expected a JSON object of parameter values")
    return data


def build_config(args, mode: str | None = None) -> McaConfig:
    params = load_config(args.config) if args.config else {}
    overrides = {"dt": args.dt}
    if getattr(args, "horizon", None) is not None:
        overrides["horizon"] = args.horizon
    if mode or getattr(args, "algo", None):
        overrides["mode"] = mode or args.algo
    try:
        return McaConfig.from_mapping(params, **overrides)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad configuration: {exc}") from None


def _scenario(args):
    try:
        return get_scenario(args.scenario, args.dt)
    except FileNotFoundError as exc:
        raise CliError(f"scenario file not found: {exc.filename}") from None
    except ScenarioError as exc:
        raise CliError(str(exc)) from None


def _scale(args, scenario) -> float:
    if args.scale is not None:
        return args.scale
    k = recommend_scale(scenario.accel(), scenario.dt).k_final
    log.info("no --scale given, using recommended k=%.4f", k)
    return k


def cmd_run(args) -> int:
    scenario = _scenario(args)
    cfg = build_config(args)
    k = _scale(args, scenario)
    plant = make_plant(args.plant)
    summary, traj = evaluation.run_summary(cfg, scenario, k, plant)
    traj.to_csv(args.out)
    print(summary.line())
    if traj.flags:
        print(f"flags: {len(traj.flags)} workspace overshoot ticks", file=sys.stderr)
    if traj.error:
        print(f"run aborted: {traj.error}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args) -> int:
    scenario = _scenario(args)
    base = build_config(args)
    k = _scale(args, scenario)
    rows = evaluation.sweep_horizons(scenario, k, args.horizons, base=base, workers=args.workers, out=args.out)
    for r in rows:
        print(r.line())
    return 1 if any(r.error for r in rows) else 0


def cmd_compare(args) -> int:
    scenario = _scenario(args)
    base = build_config(args)
    k = _scale(args, scenario)
    res = evaluation.compare(scenario, k, base, make_plant(args.plant))
    for r in res.values():
        print(r.line())
    fs, bm = res["fs"], res["benchmark"]
    print(f"delta (fs - benchmark): long={fs.rmse_long - bm.rmse_long:+.4f} "
          f"lat={fs.rmse_lat - bm.rmse_lat:+.4f} total={fs.rmse_total - bm.rmse_total:+.4f}")
    return 1 if fs.error or bm.error else 0


def cmd_recommend(args) -> int:
    scenario = _scenario(args)
    rec = recommend_scale(scenario.accel(), scenario.dt)
    print(f"k_theta={rec.k_theta:.4f} k_omega={rec.k_omega:.4f} k_final={rec.k_final:.4f} "
          f"(max|f|={rec.max_f:.4f} m/s^2, max|df/dt|={rec.max_fdot:.4f} m/s^3)")
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsmca", description="MPC motion cueing simulations")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, horizon=True, algo=False):
        sp.add_argument("--scenario", required=True, help="step | multisine | slalom | csv:PATH")
        sp.add_argument("--dt", type=_positive_float, default=0.01)
        sp.add_argument("--scale", type=_positive_float, default=None, help="scaling factor k (default: recommended)")
        sp.add_argument("--config", help="JSON file of parameter overrides")
        if horizon:
            sp.add_argument("--horizon", type=_positive_int, default=40)
        if algo:
            sp.add_argument("--algo", choices=("fs", "benchmark"), default="fs")

    run = sub.add_parser("run", help="one closed-loop simulation")
    common(run, algo=True)
    run.add_argument("--plant", choices=("ideal", "surrogate"), default="ideal")
    run.add_argument("--out", default="traj.csv")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="both algorithms over a list of horizons")
    common(sweep, horizon=False)
    sweep.add_argument("--horizons", type=_horizon_list, default=list(evaluation.DEFAULT_HORIZONS))
    sweep.add_argument("--workers", type=_positive_int, default=1)
    sweep.add_argument("--out", default="sweep.csv")
    sweep.set_defaults(func=cmd_sweep)

    cmp_ = sub.add_parser("compare", help="fs against benchmark at one horizon")
    common(cmp_)
    cmp_.add_argument("--plant", choices=("ideal", "surrogate"), default="ideal")
    cmp_.set_defaults(func=cmd_compare)

    rec = sub.add_parser("recommend-scale", help="scaling factor from tilt capability")
    rec.add_argument("--scenario", required=True)
    rec.add_argument("--dt", type=_positive_float, default=0.01)
    rec.set_defaults(func=cmd_recommend)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    if getattr(args, "horizons", None) == []:
        parser.error("--horizons must list at least one horizon")
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"fsmca: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fsmca: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
