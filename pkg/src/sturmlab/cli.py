"""Command-line front end.

    sturmlab bands    --freq 1,periodic --lambda 24 --depth 8 --out bands.jsonl
    sturmlab gaps     --freq 2,periodic --lambda 24 --depth 8
    sturmlab dims     --lambda 24 --depth 14 --samples 200 --seed 7
    sturmlab pressure --lambda 24 --depth 14 --samples 200 --seed 7
    sturmlab lyapunov --lambda 24 --depth 14 --samples 200 --seed 7
    sturmlab dos      --freq 1,periodic --lambda 24 --depth 6 --truncation 8
    sturmlab verify   --suite covering --freq 2,periodic --lambda 24 --depth 7

Exit codes: 0 success, 1 usage or domain error, 2 verification failure.
Every artifact starts with a versioned header line; CSV headers are ``#``
comments and JSON-lines headers are a first JSON object.  Without ``--out``
artifacts go to ``$STURMLAB_OUTDIR/<command>.<ext>`` when that variable is
set, else to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Sequence

from . import __version__
from .cf import Frequency

log = logging.getLogger("sturmlab")

SCHEMA_VERSION = 1
COMMANDS = ("bands", "gaps", "dims", "pressure", "lyapunov", "dos", "verify")
OUTDIR_ENV = "STURMLAB_OUTDIR"


class UsageError(Exception):
    pass


class VerificationError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    freq: Frequency | None = None
    lam: float = 24.0
    depth: int | None = None
    samples: int = 200
    truncation: int = 8
    seed: int = 7
    out: str | None = None
    format: str = "csv"
    plot: str | None = None
    suite: str = "all"
    t_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    eigen: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        for name in ("samples", "truncation"):
            if getattr(self, name) <= 0:
                raise UsageError(f"--{name} must be a positive integer")
        if self.depth is not None and self.depth <= 0:
            raise UsageError("--depth must be a positive integer")
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        if self.command in ("dims", "dos", "gaps", "pressure", "lyapunov") and self.lam < 24:
            raise UsageError(f"{self.command} needs --lambda >= 24")
        if self.lam <= 4:
            raise UsageError("--lambda must exceed 4")
        if self.command in ("bands", "gaps", "dos") and self.freq is None:
            raise UsageError(f"{self.command} needs --freq")


def versions() -> dict:
    import gmpy2
    import numpy
    import scipy

    return {
        "sturmlab": __version__,
        "python": ".".join(map(str, sys.version_info[:3])),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "gmpy2": gmpy2.version(),
    }


def header(cfg: RunConfig, schema: str) -> dict:
    h = {
        "schema": f"{schema}/{SCHEMA_VERSION}",
        "seed": cfg.seed,
        "lambda": cfg.lam,
        "versions": versions(),
    }
    if cfg.freq is not None:
        h["freq"] = cfg.freq.label()
    return h


def _csv_text(cfg: RunConfig, schema: str, columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(header(cfg, schema), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def _json_text(cfg: RunConfig, schema: str, columns: Sequence[str], rows) -> str:
    body = {"header": header(cfg, schema), "columns": list(columns), "rows": [[_cell(x) for x in r] for r in rows]}
    return json.dumps(body, sort_keys=True, indent=1) + "\n"


def _cell(x):
    if isinstance(x, float):
        return repr(x)
    return x


def _emit(cfg: RunConfig, text: str, ext: str, suffix: str = ""):
    path = cfg.out
    if path is None and os.environ.get(OUTDIR_ENV):
        path = os.path.join(os.environ[OUTDIR_ENV], f"{cfg.command}{suffix}.{ext}")
    elif path is not None and suffix:
        root, e = os.path.splitext(path)
        path = f"{root}{suffix}{e or '.' + ext}"
    if path is None:
        sys.stdout.write(text)
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _table(cfg: RunConfig, schema: str, columns, rows, suffix: str = ""):
    rows = list(rows)
    if cfg.format == "json":
        _emit(cfg, _json_text(cfg, schema, columns, rows), "json", suffix)
    else:
        _emit(cfg, _csv_text(cfg, schema, columns, rows), "csv", suffix)


# ---------------------------------------------------------------------------
# commands


def cmd_bands(cfg: RunConfig):
    from .spectrum import BandTree

    tree = BandTree(cfg.freq, cfg.lam, cfg.depth or 8).expand()
    head = json.dumps({"header": header(cfg, "bands")}, sort_keys=True)
    if cfg.format == "csv":
        cols = ["order", "type", "code", "lo", "hi", "log_len", "parent_code"]
        _table(cfg, "bands", cols, ([b.to_dict()[c] for c in cols] for b in tree.walk()))
    else:
        _emit(cfg, head + "\n" + tree.to_jsonl(), "jsonl")
    if cfg.plot:
        from .plotting import plot_bands

        plot_bands(tree, cfg.plot)


def cmd_gaps(cfg: RunConfig):
    from .spectrum import BandTree, gap_ratio_check, gaps_of_order

    depth = cfg.depth or 8
    tree = BandTree(cfg.freq, cfg.lam, depth)
    rows, pts = [], []
    for n in range(-1, depth - 1):
        a3 = 1 if n < 0 else tree.digit(n + 1) ** 3
        for g in gaps_of_order(tree, n):
            r = g.ratio()
            parent = "root" if g.parent.order < 0 else str(g.parent.code)
            rows.append((n, parent, format(g.lo, ".20g"), format(g.hi, ".20g"), r, r * a3))
            pts.append((n, r * a3))
    st = gap_ratio_check(tree, depth - 2)
    log.info("global minimum of ratio*a^3 over orders <= %d: %.6g", depth - 2, st.global_min)
    _table(cfg, "gaps", ["order", "parent", "lo", "hi", "ratio", "ratio_a3"], rows)
    if cfg.plot:
        from .plotting import plot_gap_ratios

        plot_gap_ratios(pts, cfg.plot)


def cmd_dims(cfg: RunConfig):
    if cfg.freq is not None:
        from .dimension import pre_dimension

        pd = pre_dimension(cfg.freq, cfg.lam, depth=cfg.depth or 10)
        rows = [(cfg.lam, n, s) for n, s in sorted(pd.s.items())]
        _table(cfg, "pre_dimension", ["lambda", "n", "s_n"], rows)
        return
    from .dimension import dimension_envelope, rho_estimate, solve_D

    d = solve_D(cfg.lam, cfg.depth or 14, cfg.samples, cfg.seed)
    rho = rho_estimate(2000, cfg.samples, cfg.seed)
    lo, hi = dimension_envelope(cfg.lam, rho.rho)
    log.info("rho_hat=%.6g envelope=(%.4g, %.4g)", rho.rho, lo, hi)
    _table(cfg, "dimension", ["lambda", "D_hat", "lo", "hi", "seed"], [(cfg.lam, d.value, d.bracket[0], d.bracket[1], cfg.seed)])


def cmd_pressure(cfg: RunConfig):
    from .dimension import pressure_curve

    c = pressure_curve(cfg.lam, cfg.t_grid, cfg.depth or 14, cfg.samples, cfg.seed)
    _table(cfg, "pressure", ["lambda", "t", "n", "samples", "pressure", "stderr"], c.rows())
    if cfg.plot:
        from .plotting import plot_pressure

        plot_pressure(c, cfg.plot)


def cmd_lyapunov(cfg: RunConfig):
    from .cf import LEVY
    from .dos import psi_lyapunov_estimate

    n = cfg.depth or 14
    mode = "typical" if cfg.freq is None else cfg.freq
    L, se, diag = psi_lyapunov_estimate(cfg.lam, n, cfg.samples, cfg.seed, mode, cfg.truncation)
    d = LEVY / L
    lo = LEVY / (L + 3 * se)
    hi = LEVY / (L - 3 * se) if L > 3 * se else math.inf
    cols = ["lambda", "n", "samples", "L_hat", "stderr", "d_hat", "d_lo", "d_hi"]
    _table(cfg, "lyapunov", cols, [(cfg.lam, n, cfg.samples, L, se, d, lo, hi)])
    if cfg.plot:
        from .plotting import plot_local_dimensions

        plot_local_dimensions(diag["local_dimensions"], cfg.plot)


def cmd_dos(cfg: RunConfig):
    from .coding import enumerate_words
    from .dos import dos_mass, periodic_eigenvalues

    n = cfg.depth if cfg.depth is not None else 4
    words = enumerate_words("boundary", cfg.freq.prefix(n)) if n else []
    rows = []
    for w in words:
        m = dos_mass(cfg.freq, w, cfg.truncation)
        rows.append((str(w), m.numerator, m.denominator, m.m))
    _table(cfg, "dos_mass", ["word", "numerator", "denominator", "m"], rows)
    if cfg.eigen or cfg.plot:
        ev = periodic_eigenvalues(cfg.freq, cfg.lam, n)
        if cfg.eigen:
            _table(cfg, "eigenvalues", ["E"], ((float(e),) for e in ev), suffix="_eigenvalues")
        if cfg.plot:
            from .plotting import plot_ids

            plot_ids(ev, cfg.plot)


def cmd_verify(cfg: RunConfig):
    from .verify import SuiteConfig, verify_suite

    sc = SuiteConfig(cfg.freq, cfg.lam, cfg.depth, cfg.extra.get("samples"), cfg.seed, cfg.truncation)
    checks = verify_suite(cfg.suite, sc)
    report = {"header": header(cfg, "verify"), "checks": [c.to_dict() for c in checks]}
    _emit(cfg, json.dumps(report, sort_keys=True, indent=1, default=str) + "\n", "json")
    for c in checks:
        log.info("%s %s: %s", "PASS" if c.passed else "FAIL", c.suite, c.name)
    if not all(c.passed for c in checks):
        raise VerificationError(f"{sum(not c.passed for c in checks)} check(s) failed")


HANDLERS = {
    "bands": cmd_bands,
    "gaps": cmd_gaps,
    "dims": cmd_dims,
    "pressure": cmd_pressure,
    "lyapunov": cmd_lyapunov,
    "dos": cmd_dos,
    "verify": cmd_verify,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit code."""
    from .coding import CapExceeded
    from .dimension import BudgetExceeded, RootNotBracketed
    from .dos import CountMismatch, SizeCapExceeded
    from .spectrum import BracketingFailure, VerificationFailure

    try:
        cfg.validate()
        log.info("command=%s seed=%d versions=%s", cfg.command, cfg.seed, json.dumps(versions(), sort_keys=True))
        HANDLERS[cfg.command](cfg)
    except (VerificationError, VerificationFailure, CountMismatch, BracketingFailure) as exc:
        log.error("verification failure: %s", exc)
        return 2
    except (UsageError, ValueError, KeyError, SizeCapExceeded, CapExceeded, BudgetExceeded, RootNotBracketed) as exc:
        log.error("%s", exc)
        return 1
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _freq_arg(text: str) -> Frequency:
    try:
        return Frequency.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _grid_arg(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("t grid must be comma-separated numbers") from exc
    if any(t < 0 for t in vals):
        raise argparse.ArgumentTypeError("t grid values must be >= 0")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--freq", type=_freq_arg, help="digits '3,1,4', periodic '1,2;3,periodic', or 'seed:S[:stream[:index]]'")
    common.add_argument("--lambda", dest="lam", type=float, default=24.0, help="coupling (default 24)")
    common.add_argument("--depth", type=int, help="tree depth / order n")
    common.add_argument("--samples", type=int, help="Monte-Carlo samples (default 200)")
    common.add_argument("--truncation", type=int, default=8, help="look-ahead m for DOS masses")
    common.add_argument("--seed", type=int, default=7)
    common.add_argument("--out", help="output path (default: $%s/<command>.<ext> or stdout)" % OUTDIR_ENV)
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--plot", metavar="PNG", help="also write a figure (needs matplotlib)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="sturmlab", description="Spectra, dimensions and density of states of Sturmian Hamiltonians.")
    p.add_argument("--version", action="version", version=f"sturmlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "pressure":
            sp.add_argument("--t-grid", type=_grid_arg, default=(0.0, 0.25, 0.5, 0.75, 1.0))
        if name == "dos":
            sp.add_argument("--eigen", action="store_true", help="also write approximant eigenvalues")
        if name == "verify":
            sp.add_argument("--suite", choices=("cf", "coding", "covering", "chebyshev", "gaps", "pressure", "dos", "all"), default="all")
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fmt = ns.format or ("json" if ns.command in ("bands", "verify") else "csv")
    extra = {"samples": ns.samples} if ns.command == "verify" else {}
    return RunConfig(
        command=ns.command,
        freq=ns.freq,
        lam=ns.lam,
        depth=ns.depth,
        samples=200 if ns.samples is None else ns.samples,
        truncation=ns.truncation,
        seed=ns.seed,
        out=ns.out,
        format=fmt,
        plot=ns.plot,
        suite=getattr(ns, "suite", "all"),
        t_grid=getattr(ns, "t_grid", (0.0, 0.25, 0.5, 0.75, 1.0)),
        eigen=getattr(ns, "eigen", False),
        extra=extra,
    )


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(name)s: %(message)s", stream=sys.stderr)
    return run(config_from_args(ns))


if __name__ == "__main__":
    sys.exit(main())
