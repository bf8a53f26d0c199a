"""Command line entry point: ``ringlat <scenario> [--config PATH] [--set k=v]...``."""

from __future__ import annotations

import argparse
import sys

from .config import DEFAULTS, ConfigError, resolve

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ringlat", description="Ring-cavity lattice scenarios.")
    ap.add_argument("scenario", help="scenario name, or 'list'")
    ap.add_argument("--config", help="TOML file with parameter overrides")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override one parameter (dotted key path); may repeat")
    ap.add_argument("--out", help="output directory (default runs/<scenario>)")
    ap.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.scenario == "list":
        for name in DEFAULTS:
            print(name)
        return EXIT_OK
    try:
        text = None
        if args.config:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError("--config", str(exc)) from exc
        cfg = resolve(args.scenario, text, args.overrides, seed=args.seed, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    from .scenarios import run  # heavy imports only once the config is valid

    try:
        manifest = run(cfg)
    except Exception as exc:  # any module failure maps to the runtime exit code
        print(f"{cfg.scenario} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{cfg.scenario}: wrote {len(manifest['files'])} files to {cfg.out_dir} "
          f"in {manifest['duration_s']:.2f} s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
