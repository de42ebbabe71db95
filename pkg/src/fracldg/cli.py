"""``fracldg run`` command line entry point.

Exit status: 0 when every row completed, 2 when some rows failed (the
completed ones are still written), 1 for an invalid sweep specification.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from ._accel import backend
from .errors import InvalidArgument
from .harness import emit_table, make_spec, run_sweep

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracldg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one convergence sweep and emit its error table")
    # every default is None so config-file values survive unless overridden
    r.add_argument("--config", help="YAML file with RunSpec keys (flags override it)")
    r.add_argument("--case", help="ex1 | ex2 | ex3 | ex4")
    r.add_argument("--beta", type=float)
    r.add_argument("--N", type=int)
    r.add_argument("--sweep", choices=("K", "dt", "theta"))
    r.add_argument("--values", help="comma list, e.g. 10,20,40 or T/100,T/200 or 1/10,1/20")
    r.add_argument("--T", help="final time (default 0.5)")
    r.add_argument("--S", type=int, help="alpha quadrature nodes when not swept")
    r.add_argument("--dt", help="time step when not swept (default T/500)")
    r.add_argument("--K", type=int, help="element count when not swept")
    r.add_argument("--weight", choices=("flat", "gamma3"))
    r.add_argument("--forcing", choices=("analytic", "discrete"))
    r.add_argument("--flux", choices=("left", "right"))
    r.add_argument("--field", help="ex4 only: report u1 or u2 instead of both")
    r.add_argument("--S-ref", dest="S_ref", type=int,
                   help="alpha nodes of the reference operator in discrete theta sweeps")
    r.add_argument("--format", dest="fmt", choices=("csv", "md"), default=None)
    r.add_argument("--out", help="output file (stdout when omitted)")
    r.add_argument("--jobs", type=int)
    r.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise InvalidArgument(f"{path}: expected a key/value mapping")
    return data


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    opts = vars(args).copy()
    opts.pop("command")
    opts.pop("verbose")
    config_path = opts.pop("config")
    out = opts.pop("out")
    fmt = opts.pop("fmt")
    try:
        cfg = _load_config(config_path) if config_path else {}
        out = cfg.pop("out", None) if out is None else out
        cfg_fmt = cfg.pop("format", None)
        fmt = fmt or cfg_fmt or "csv"
        cfg.update({k: v for k, v in opts.items() if v is not None})
        spec = make_spec(cfg)
    except (InvalidArgument, OSError, yaml.YAMLError) as exc:
        print(f"fracldg: invalid sweep specification: {exc}", file=sys.stderr)
        return EXIT_INVALID

    logging.getLogger(__name__).info("kernel backend: %s", backend())
    table = run_sweep(spec)
    try:
        text = emit_table(table, fmt, out)
    except OSError as exc:
        print(f"fracldg: cannot write {out}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if out is None:
        sys.stdout.write(text)
    for value, msg in table.failures:
        print(f"fracldg: row {spec.sweep}={value:g} failed: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if table.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
