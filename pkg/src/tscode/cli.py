"""Command-line surface: validate, encode, decode, rate, fit, check.

Exit codes: 0 success, 1 unreadable input, 2 schema error, 3 invariant or
domain error, 4 resource budget exceeded, 5 corrupt or mismatched container.
All outputs are written atomically (temp file + rename); commands are
deterministic given their configuration and seed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import container as containerfmt
from .codec import ClassOrdering
from .errors import BudgetError, ContainerError, SchemaError, SpecError
from .markov import markov_third_order_fit, markov_type_index
from .pointtypes import derive_lattice, point_type_index
from .quantized import Grid, build_type_index
from .rates import (
    SourceSpec,
    m_eps,
    max_sandwich_deviation,
    ml_approx_check,
    normality_check,
    third_order_fit,
)
from .report import render_fit_svg, render_report
from .specfile import ParsedSpec, parse_spec_file

EXIT_IO = 1
EXIT_SCHEMA = 2
EXIT_INVARIANT = 3
EXIT_BUDGET = 4
EXIT_CONTAINER = 5


@dataclass(frozen=True)
class RunConfig:
    spec: ParsedSpec
    mode: str
    s: float
    anchor: tuple[float, ...] | None
    n_list: tuple[int, ...]
    epsilon: float
    seed: int
    budget_compositions: int | None
    budget_paths: int | None
    out: Path | None


def _parse_anchor(text: str | None):
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise SchemaError(f"anchor must be comma-separated reals, got {text!r}") from None


def _build_config(args, need_n: bool) -> RunConfig:
    problems = []
    spec = None
    try:
        spec = parse_spec_file(args.spec)
    except FileNotFoundError as exc:
        raise exc
    except (SchemaError, SpecError) as exc:
        problems.append(str(exc))
    mode = args.mode
    if spec is not None:
        if mode is None:
            mode = "markov" if spec.kind == "markov" else \
                ("point" if spec.kind == "point" else "quantized")
        if mode == "markov" and spec.kind != "markov":
            problems.append("mode markov requires a tau2/x0 spec file")
        if mode in ("quantized", "point") and spec.kind == "markov":
            problems.append(f"mode {mode} cannot use a markov spec file")
        if mode == "point" and spec.kind == "family":
            problems.append("mode point requires basis/coeff rows in the spec file")
    if mode not in (None, "quantized", "point", "markov"):
        problems.append(f"unknown mode {mode!r}")
    if args.s <= 0 or not math.isfinite(args.s):
        problems.append(f"grid scale s must be positive, got {args.s}")
    anchor = None
    try:
        anchor = _parse_anchor(args.anchor)
    except SchemaError as exc:
        problems.append(str(exc))
    n_list: tuple[int, ...] = ()
    if getattr(args, "n", None) is not None and getattr(args, "n_grid", None):
        problems.append("give either --n or --n-grid, not both")
    elif getattr(args, "n", None) is not None:
        n_list = (args.n,)
    elif getattr(args, "n_grid", None):
        try:
            n_list = tuple(int(v) for v in args.n_grid.split(","))
        except ValueError:
            problems.append(f"--n-grid must be comma-separated integers, got {args.n_grid!r}")
    if need_n and not n_list:
        problems.append("a blocklength is required (--n or --n-grid)")
    if n_list and (any(v < 1 for v in n_list) or list(n_list) != sorted(set(n_list))):
        problems.append(f"blocklengths must be positive and strictly increasing: {n_list}")
    if not (0.0 < args.epsilon < 1.0):
        problems.append(f"epsilon must be in (0,1), got {args.epsilon}")
    for name in ("budget_compositions", "budget_paths"):
        v = getattr(args, name)
        if v is not None and v < 1:
            problems.append(f"--{name.replace('_', '-')} must be positive")
    if problems:
        raise SchemaError("invalid configuration:\n  " + "\n  ".join(problems))
    return RunConfig(
        spec=spec, mode=mode, s=args.s, anchor=anchor, n_list=n_list,
        epsilon=args.epsilon, seed=args.seed,
        budget_compositions=args.budget_compositions,
        budget_paths=args.budget_paths,
        out=Path(args.out) if args.out else None,
    )


def _atomic_write(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    if isinstance(data, bytes):
        tmp.write_bytes(data)
    else:
        tmp.write_text(data)
    os.replace(tmp, path)


def _read_sequence(path: Path) -> tuple[int, ...]:
    try:
        tokens = path.read_text().split()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read sequence file {path}: {exc}") from exc
    if not tokens:
        raise SchemaError(f"sequence file {path} is empty")
    try:
        return tuple(int(t) for t in tokens)
    except ValueError:
        raise SchemaError(f"sequence file {path} must contain integer symbols") from None


def _build_ordering(cfg: RunConfig, n: int) -> ClassOrdering:
    if cfg.mode == "markov":
        ms = cfg.spec.markov
        grid = Grid.create(n=n, s=cfg.s, d=ms.d, anchor=cfg.anchor)
        index = markov_type_index(ms, n, grid, budget_paths=cfg.budget_paths)
    elif cfg.mode == "point":
        lmap = derive_lattice(cfg.spec.stat_map)
        index = point_type_index(cfg.spec.family, lmap, n,
                                 budget=cfg.budget_compositions)
    else:
        fam = cfg.spec.family
        grid = Grid.create(n=n, s=cfg.s, d=fam.d, anchor=cfg.anchor)
        index = build_type_index(fam, n, grid, budget=cfg.budget_compositions)
    return ClassOrdering(index)


def cmd_validate(args) -> int:
    spec = parse_spec_file(args.spec)
    diagnostics = [f"kind {spec.kind}"]
    if spec.kind == "markov":
        ms = spec.markov
        diagnostics.append(f"alphabet {ms.alphabet.size} d {ms.d} x0 {ms.x0}")
    else:
        fam = spec.family
        diagnostics.append(f"alphabet {fam.alphabet.size} d {fam.d}")
        if spec.stat_map is not None:
            lmap = derive_lattice(spec.stat_map)
            diagnostics.append(f"d_prime {lmap.d_prime}")
            if lmap.d_prime < fam.d:
                diagnostics.append(
                    f"warning: declared basis gives d_prime {lmap.d_prime} < d {fam.d}"
                )
            worst = max(spec.stat_map.hint_residuals())
            if worst > 1e-6:
                diagnostics.append(
                    f"warning: basis hints deviate from tau by up to {worst:.3g}"
                )
    print("valid")
    for line in diagnostics:
        print(line)
    return 0


def cmd_encode(args) -> int:
    cfg = _build_config(args, need_n=False)
    seq = _read_sequence(Path(args.input))
    ordering = _build_ordering(cfg, len(seq))
    codeword = ordering.encode(seq)
    ms = cfg.spec.markov
    payload = containerfmt.pack(containerfmt.Container(
        spec_hash=cfg.spec.spec_hash,
        mode=cfg.mode,
        s=cfg.s if cfg.mode != "point" else 0.0,
        anchor=cfg.anchor or ((0.0,) * (ms.d if ms else cfg.spec.family.d)
                              if cfg.mode != "point" else ()),
        x0=ms.x0 if ms else None,
        n=len(seq),
        codeword=codeword,
    ))
    _atomic_write(Path(args.output), payload)
    print(f"encoded n={len(seq)} to {codeword.length} bits")
    return 0


def cmd_decode(args) -> int:
    cfg = _build_config(args, need_n=False)
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read container {args.input}: {exc}") from exc
    cont = containerfmt.unpack(data)
    if cont.spec_hash != cfg.spec.spec_hash:
        raise ContainerError(
            "container was encoded with a different family spec "
            f"(hash {cont.spec_hash.hex()[:16]}..., expected "
            f"{cfg.spec.spec_hash.hex()[:16]}...)"
        )
    if cont.mode != cfg.mode:
        raise ContainerError(f"container mode {cont.mode} does not match --mode {cfg.mode}")
    if cont.mode == "markov" and cont.x0 != cfg.spec.markov.x0:
        raise ContainerError(f"container x0 {cont.x0} does not match spec x0")
    run = RunConfig(**{**cfg.__dict__, "s": cont.s if cont.mode != "point" else cfg.s,
                       "anchor": cont.anchor if cont.mode != "point" else None})
    ordering = _build_ordering(run, cont.n)
    seq = ordering.decode(cont.codeword)
    _atomic_write(Path(args.output), " ".join(str(v) for v in seq) + "\n")
    print(f"decoded {cont.n} symbols")
    return 0


def _source_of(cfg: RunConfig) -> SourceSpec:
    return SourceSpec(cfg.spec.family, cfg.spec.theta_star)


def cmd_rate(args) -> int:
    cfg = _build_config(args, need_n=True)
    rows = []
    for n in cfg.n_list:
        if cfg.mode == "markov":
            from .markov import markov_m_eps
            ms = cfg.spec.markov
            grid = Grid.create(n=n, s=cfg.s, d=ms.d, anchor=cfg.anchor)
            index = markov_type_index(ms, n, grid, budget_paths=cfg.budget_paths)
            rep = markov_m_eps(index, np.asarray(cfg.spec.theta_star), cfg.epsilon)
        else:
            ordering = _build_ordering(cfg, n)
            rep = m_eps(_source_of(cfg), ordering.index, cfg.epsilon)
        rows.append(rep)
    print(f"{'n':>6} {'epsilon':>8} {'gamma':>12} {'rate':>10}  M")
    for rep in rows:
        print(f"{rep.n:>6} {rep.epsilon:>8.4f} {rep.gamma:>12.6f} {rep.rate:>10.6f}  {rep.M}")
    if cfg.out:
        fields = [("mode", rows[0].mode), ("epsilon", repr(cfg.epsilon))]
        for rep in rows:
            fields.append(("result", f"n={rep.n} gamma={rep.gamma!r} M={rep.M} rate={rep.rate!r}"))
        _atomic_write(cfg.out / "rate_report.txt", render_report("rate", fields))
        print(f"wrote {cfg.out / 'rate_report.txt'}")
    return 0


def cmd_fit(args) -> int:
    cfg = _build_config(args, need_n=True)
    if len(cfg.n_list) < 3:
        raise SpecError("--n-grid needs at least 3 blocklengths for a slope fit")
    if cfg.mode == "markov":
        rep = markov_third_order_fit(cfg.spec.markov, np.asarray(cfg.spec.theta_star),
                                     cfg.n_list, cfg.epsilon, s=cfg.s,
                                     anchor=cfg.anchor, budget_paths=cfg.budget_paths)
    else:
        rep = third_order_fit(_source_of(cfg), cfg.n_list, cfg.epsilon,
                              mode=cfg.mode, s=cfg.s, anchor=cfg.anchor,
                              stat_map=cfg.spec.stat_map,
                              budget=cfg.budget_compositions)
    print(f"mode {rep.mode}  slope {rep.slope:.4f}  intercept {rep.intercept:.4f}")
    for (n, rate, y), resid in zip(rep.points, rep.residuals):
        print(f"  n={n:>6} rate={rate:.6f} excess={y:+.4f} residual={resid:+.4f}")
    if cfg.out:
        fields = [("mode", rep.mode), ("epsilon", repr(cfg.epsilon)),
                  ("slope", repr(rep.slope)), ("intercept", repr(rep.intercept))]
        for (n, rate, y), resid in zip(rep.points, rep.residuals):
            fields.append(("point", f"n={n} rate={rate!r} excess={y!r} residual={resid!r}"))
        _atomic_write(cfg.out / "fit_report.txt", render_report("fit", fields))
        svg = render_fit_svg(rep.points, rep.slope, rep.intercept,
                             f"excess rate vs log2 n ({rep.mode}, eps={cfg.epsilon:g})")
        _atomic_write(cfg.out / "fit.svg", svg)
        print(f"wrote {cfg.out / 'fit_report.txt'} and {cfg.out / 'fit.svg'}")
    return 0


def cmd_check(args) -> int:
    cfg = _build_config(args, need_n=True)
    if cfg.mode == "markov":
        raise SpecError("check currently covers memoryless families only")
    fam = cfg.spec.family
    fields = []
    print("likelihood-approximation gap (statistic vs cuboid center):")
    for n in cfg.n_list:
        grid = Grid.create(n=n, s=cfg.s, d=fam.d, anchor=cfg.anchor)
        gap = ml_approx_check(fam, grid, n, budget=cfg.budget_compositions)
        bound = 2 * fam.kappa * cfg.s
        print(f"  n={n:>5}: max gap {gap:.6f} <= bound {bound:.6f}")
        fields.append(("ml_gap", f"n={n} gap={gap!r} bound={bound!r}"))
    print("class-size sandwich deviation (constant fitted at the smallest n):")
    base_n = cfg.n_list[0]
    grid0 = Grid.create(n=base_n, s=cfg.s, d=fam.d, anchor=cfg.anchor)
    dev0 = max_sandwich_deviation(
        fam, grid0, build_type_index(fam, base_n, grid0, budget=cfg.budget_compositions))
    cstar = max(0.0, dev0 - 2 * fam.kappa * cfg.s)
    fields.append(("sandwich_fit", f"n={base_n} dev={dev0!r} cstar={cstar!r}"))
    print(f"  n={base_n:>5}: deviation {dev0:.6f} (fit C*={cstar:.6f})")
    for n in cfg.n_list[1:]:
        grid = Grid.create(n=n, s=cfg.s, d=fam.d, anchor=cfg.anchor)
        dev = max_sandwich_deviation(
            fam, grid, build_type_index(fam, n, grid, budget=cfg.budget_compositions))
        ok = dev <= 2 * fam.kappa * cfg.s + cstar + 1e-9
        print(f"  n={n:>5}: deviation {dev:.6f} bound {2 * fam.kappa * cfg.s + cstar:.6f} "
              f"{'ok' if ok else 'VIOLATED'}")
        fields.append(("sandwich", f"n={n} dev={dev!r} ok={ok}"))
    theta = np.asarray(cfg.spec.theta_star)
    if np.any(theta != 0.0):
        src = SourceSpec(fam, cfg.spec.theta_star)
        print("normality of the plug-in self-information (1e5 samples):")
        for n in cfg.n_list:
            dev = normality_check(src, n, 100_000, seed=cfg.seed)
            print(f"  n={n:>5}: sup deviation {dev:.6f} (x sqrt(n) = {dev * math.sqrt(n):.4f})")
            fields.append(("normality", f"n={n} dev={dev!r}"))
    else:
        print("normality check skipped: theta_star is zero (varentropy 0)")
        fields.append(("normality", "skipped theta_star=0"))
    if cfg.out:
        _atomic_write(cfg.out / "check_report.txt", render_report("check", fields))
        print(f"wrote {cfg.out / 'check_report.txt'}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tscode",
        description="type-size coding over quantized sufficient-statistic types",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_io=False):
        p.add_argument("--spec", required=True, help="model spec file")
        p.add_argument("--mode", choices=["quantized", "point", "markov"],
                       default=None, help="type-class mode (default: from spec kind)")
        p.add_argument("--s", type=float, default=1.0, help="cuboid side scale")
        p.add_argument("--anchor", default=None, help="grid anchor, comma-separated")
        p.add_argument("--n", type=int, default=None, help="blocklength")
        p.add_argument("--n-grid", default=None, help="comma-separated blocklengths")
        p.add_argument("--epsilon", type=float, default=0.1, help="overflow probability")
        p.add_argument("--seed", type=int, default=0, help="RNG seed")
        p.add_argument("--budget-compositions", type=int, default=None)
        p.add_argument("--budget-paths", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory for reports")
        if need_io:
            p.add_argument("input", help="input file")
            p.add_argument("output", help="output file")

    p = sub.add_parser("validate", help="check a spec file")
    p.add_argument("--spec", required=True)
    common(sub.add_parser("encode", help="encode a symbol file"), need_io=True)
    common(sub.add_parser("decode", help="decode a container"), need_io=True)
    common(sub.add_parser("rate", help="evaluate the finite-blocklength rate"))
    common(sub.add_parser("fit", help="third-order slope experiment"))
    common(sub.add_parser("check", help="run the bound checks"))
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "encode": cmd_encode,
        "decode": cmd_decode,
        "rate": cmd_rate,
        "fit": cmd_fit,
        "check": cmd_check,
    }
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ContainerError as exc:
        print(f"container error: {exc}", file=sys.stderr)
        return EXIT_CONTAINER
    except (SpecError, ValueError) as exc:
        print(f"invariant error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
