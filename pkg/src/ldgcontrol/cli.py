"""Command-line entry point: ``ldgcontrol --preset 1 --n 32 --out runs/exp1``."""
import argparse
import json
import logging
import sys

from .config import ProblemConfig, preset_config
from .errors import ConfigError, LdgError

log = logging.getLogger("ldgcontrol")


def build_parser():
    p = argparse.ArgumentParser(
        prog="ldgcontrol",
        description="Optimal boundary control of liquid crystal defects (Q-tensor gradient flow).")
    p.add_argument("--config", help="INI configuration file (overridden by the flags below)")
    p.add_argument("--preset", type=int, choices=(1, 2, 3),
                   help="experiment: 1 move a +1/2 defect, 2 keep a defect pair apart, "
                        "3 bend a line defect in 3D")
    p.add_argument("--n", type=int, dest="n_per_side", help="cells per side of the unit square/cube")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--tf", type=float, help="final time")
    p.add_argument("--max-iters", type=int, dest="max_iter", help="optimizer iteration limit")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--checkpoint", action="store_true", default=None,
                   help="keep forward states on disk instead of in memory")
    p.add_argument("--linear-solver", choices=("cg", "direct"), help="linear solver for Newton steps")
    p.add_argument("--forward-only", action="store_true",
                   help="simulate with the initial control, no optimization")
    p.add_argument("--print-config", action="store_true",
                   help="print the resolved configuration and exit")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def resolve_config(args):
    """Configuration from ``--config``/``--preset`` plus the command-line overrides."""
    if args.config:
        cfg = ProblemConfig.from_file(args.config)
        if args.preset is not None and args.preset != cfg.preset:
            raise ConfigError(f"--preset {args.preset} conflicts with preset {cfg.preset} in {args.config}")
    else:
        cfg = preset_config(args.preset or 1)
    over = dict(n_per_side=args.n_per_side, dt=args.dt, tf=args.tf, max_iter=args.max_iter,
                out_dir=args.out_dir, checkpoint=args.checkpoint, linear_solver=args.linear_solver)
    return cfg.with_overrides(**over)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.print_config:
            sys.stdout.write(cfg.to_ini())
            return 0
        from .experiments import run_experiment

        res = run_experiment(cfg, forward_only=args.forward_only)
    except LdgError as exc:
        err = dict(error=type(exc).__name__, code=exc.code, message=str(exc))
        for key in ("step", "iterations", "residual"):
            val = getattr(exc, key, None)
            if val is not None:
                err[key] = float(val) if key == "residual" else int(val)
        sys.stderr.write(json.dumps(err) + "\n")
        return exc.code
    print(json.dumps({k: str(v) for k, v in res.files.items()}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
