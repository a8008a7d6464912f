"""Command line: run configs and presets, or evaluate the closed-form predictors."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import bessel, diagnostics
from .config import RunConfig
from .errors import ConfigurationError, DomainError
from .model import SystemParams
from .presets import NAMES, preset
from .runner import EXIT_CONFIG, run

OUTPUT_ENV = "COALSIM_OUTPUT_DIR"


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coalsim", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an INI configuration file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, help="worker threads; 1 gives bit-reproducible runs")

    p = sub.add_parser("preset", help="run a named experiment")
    p.add_argument("name", choices=NAMES)
    p.add_argument("--particles", type=int, help="particle count N0")
    p.add_argument("--desk", action="store_true", help="reduced particle count and grid")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--t-end", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--write-config", action="store_true", help="print the config instead of running")

    pr = sub.add_parser("predict", help="closed-form predictors")
    psub = pr.add_subparsers(dest="what", required=True)
    q = psub.add_parser("slope", help="regularised second-moment slope")
    q.add_argument("--mass", type=float, required=True)
    q.add_argument("--mu", type=float, required=True)
    q.add_argument("--chi", type=float, required=True)
    q.add_argument("--atoms", type=_floats, default=[], help="comma-separated atom masses")
    q = psub.add_parser("blowup", help="multispecies moment rate and blow-up condition")
    q.add_argument("--chi", type=float, required=True)
    q.add_argument("--mus", type=_floats, required=True)
    q.add_argument("--masses", type=_floats, required=True)
    q = psub.add_parser("mmax", help="largest two-species masses on the zero-rate curve")
    q.add_argument("--chi", type=float, required=True)
    q.add_argument("--mu1", type=float, required=True)
    q.add_argument("--mu2", type=float, required=True)
    q = psub.add_parser("index", help="index of a particle system")
    q.add_argument("--masses", type=_floats, required=True)
    q.add_argument("--chi", type=float, required=True)
    q.add_argument("--mu-tilde", type=float, required=True)
    q.add_argument("--gamma", type=float)
    return ap


def _predict(args) -> int:
    if args.what == "slope":
        print(f"{diagnostics.predicted_slope_regularized(args.mass, args.mu, args.chi, args.atoms):.12g}")
    elif args.what == "blowup":
        if len(args.mus) != len(args.masses):
            raise ConfigurationError("--mus and --masses need the same length")
        rate = diagnostics.mpks_moment_rate(args.chi, args.mus, args.masses)
        print(f"rate {rate:.12g}")
        print(f"blowup {'yes' if rate < 0 else 'no'}")
    elif args.what == "mmax":
        m1, m2 = diagnostics.mpks_m_max(args.chi, args.mu1, args.mu2)
        print(f"M1max {m1:.12g}")
        print(f"M2max {m2:.12g}")
    else:
        kw = {} if args.gamma is None else {"gamma": args.gamma}
        params = SystemParams(args.chi, args.mu_tilde, **kw)
        nu = bessel.bessel_index(args.masses, params)
        print(f"nu {nu:.12g}")
        print(f"origin {bessel.classify_origin(nu).value}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    default_out = os.environ.get(OUTPUT_ENV)
    try:
        if args.command == "predict":
            return _predict(args)
        if args.command == "simulate":
            cfg = RunConfig.load(args.config)
            if args.threads is not None:
                cfg.threads = args.threads
            out = args.out or default_out or cfg.out_dir
            return run(cfg, out)
        cfg = preset(args.name, desk=args.desk, n0=args.particles)
        for attr in ("seed", "threads"):
            if getattr(args, attr) is not None:
                setattr(cfg, attr, getattr(args, attr))
        if args.t_end is not None:
            cfg.t_end = args.t_end
        if args.write_config:
            sys.stdout.write(cfg.to_ini())
            return 0
        out = args.out or (os.path.join(default_out, cfg.name) if default_out else cfg.name)
        cfg.out_dir = out
        return run(cfg, out)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
