"""Convergence-study command line.

Runs mesh-halving studies for one or more fractional orders, measures errors
against closed-form or fine-mesh reference solutions, and emits CSV (or a
markdown mirror of the usual table layout). A run is deterministic: the same
configuration produces byte-identical output.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, fields as dc_fields

from .analysis import (
    REFERENCE_M,
    ConvergenceReport,
    LevelRow,
    error_norms,
    exact_q0,
    expected_rates,
    reference_solution,
)
from .assembly import DIRICHLET, MIXED, ProblemSpec, assemble_system
from .errors import ArgumentError, FracFemError
from .fields import POTENTIALS, SOURCES, ScalarField, parse_field
from .mesh import build_mesh
from .solver import solve_reconstruction, solve_standard

CSV_COLUMNS = (
    "alpha,k,h,err_l2,err_energy,err_linf,err_mu,"
    "rate_l2,rate_energy,rate_linf,rate_mu,"
    "expected_l2,expected_energy,expected_linf"
)

_METHODS = ("standard", "recon", "recon_mixed")

# Sobolev index of the catalog sources, used for predicted rates only.
_SOURCE_SMOOTHNESS = {"a": 1.0, "b": 0.5, "c": 0.25}


@dataclass
class ExperimentConfig:
    """Validated description of one convergence-study grid."""

    alphas: tuple[float, ...] = (1.5,)
    example: str = "a"
    q_kind: str = "zero"
    method: str = "standard"
    k_min: int = 5
    k_max: int = 10
    delta: float = 1.0
    reference_m: int = REFERENCE_M
    fmt: str = "csv"
    out: str | None = None
    f_expr: str | None = None
    f_hint: float | None = None
    q_expr: str | None = None
    q_hint: float | None = None

    def __post_init__(self):
        if not self.alphas:
            raise ArgumentError("at least one alpha is required")
        if self.method not in _METHODS:
            raise ArgumentError(f"method must be one of {_METHODS}, got {self.method!r}")
        if self.example not in ("a", "b", "c", "custom"):
            raise ArgumentError(f"example must be a, b, c, or custom, got {self.example!r}")
        if self.example == "custom" and not self.f_expr:
            raise ArgumentError("example 'custom' needs an f expression")
        if self.q_kind not in ("zero", "x_times_1mx", "custom"):
            raise ArgumentError(
                f"q must be zero, x_times_1mx, or custom, got {self.q_kind!r}"
            )
        if self.q_kind == "custom" and not self.q_expr:
            raise ArgumentError("q 'custom' needs a q expression")
        if not 2 <= self.k_min <= self.k_max:
            raise ArgumentError(
                f"levels need 2 <= k_min <= k_max, got {self.k_min}:{self.k_max}"
            )
        if self.delta < 1.0:
            raise ArgumentError(f"grading exponent must be >= 1, got {self.delta}")
        if self.fmt not in ("csv", "markdown"):
            raise ArgumentError(f"format must be csv or markdown, got {self.fmt!r}")
        if self.method == "recon_mixed":
            for a in self.alphas:
                if a <= 1.5:
                    raise ArgumentError(
                        f"mixed conditions need alpha > 3/2, got {a}"
                    )
        if self.reference_m < 16 or self.reference_m & (self.reference_m - 1):
            raise ArgumentError(
                f"reference mesh size must be a power of two >= 16, got {self.reference_m}"
            )
        if self.needs_reference and 2**self.k_max > self.reference_m // 8:
            raise ArgumentError(
                f"k_max={self.k_max} is too fine for the reference mesh "
                f"m={self.reference_m}; keep 2^k_max <= reference_m / 8"
            )

    @property
    def bc(self) -> str:
        return MIXED if self.method == "recon_mixed" else DIRICHLET

    @property
    def source(self) -> ScalarField:
        if self.example == "custom":
            return parse_field(self.f_expr, self.f_hint)
        return SOURCES[self.example]()

    @property
    def potential(self) -> ScalarField:
        if self.q_kind == "custom":
            return parse_field(self.q_expr, self.q_hint)
        return POTENTIALS[self.q_kind]()

    @property
    def needs_reference(self) -> bool:
        f = self.source
        return not (self.potential.is_zero and f.powersum is not None and f.powersum.is_left)

    @property
    def source_smoothness(self) -> float:
        if self.example in _SOURCE_SMOOTHNESS:
            return _SOURCE_SMOOTHNESS[self.example]
        ps = self.source.powersum
        if ps is not None and ps.terms:
            candidates = [
                t.exponent + 0.5
                for t in ps.terms
                if t.anchor > 0.0 or t.exponent != round(t.exponent)
            ]
            if candidates:
                return float(min(max(min(candidates), 0.0), 1.5))
            return 1.0
        hint = self.source.hint or 0.0
        return float(min(max(hint + 0.5, 0.0), 1.5))


def _config_from_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {f.name for f in dc_fields(ExperimentConfig)} | {"levels", "q"}
    unknown = set(raw) - known
    if unknown:
        raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _parse_levels(text: str) -> tuple[int, int]:
    try:
        lo, _, hi = text.partition(":")
        return int(lo), int(hi if hi else lo)
    except ValueError:
        raise ArgumentError(f"levels must look like '5:10', got {text!r}") from None


def run_experiment(config: ExperimentConfig) -> list[ConvergenceReport]:
    """Run the study grid; a failing (alpha, method) cell is reported as an
    error row while the remaining cells still run."""
    reports = []
    for alpha in config.alphas:
        expected = expected_rates(
            alpha,
            "standard" if config.method == "standard" else "reconstruction",
            config.bc,
            config.source_smoothness,
        )
        report = ConvergenceReport(
            alpha=alpha,
            method=config.method,
            bc=config.bc,
            example=config.example,
            q_label=config.potential.label,
            delta=config.delta,
            expected=expected,
        )
        try:
            report.rows = _run_cell(config, alpha)
        except FracFemError as exc:
            report.rows = []
            report.error = f"{type(exc).__name__}: {exc}"
        reports.append(report)
    return reports


def _run_cell(config: ExperimentConfig, alpha: float) -> list[LevelRow]:
    spec = ProblemSpec(alpha=alpha, q=config.potential, f=config.source, bc=config.bc)
    if config.needs_reference:
        exact = reference_solution(spec, config.reference_m)
    else:
        exact = exact_q0(spec)
    rows = []
    for k in range(config.k_min, config.k_max + 1):
        m = 2**k
        mesh = build_mesh(m, config.delta)
        if config.method == "standard":
            system = assemble_system(spec, mesh, "standard")
            sol = solve_standard(system)
            norms = error_norms(sol, exact, "full_u", config.reference_m)
            err_mu = None
        else:
            sol = solve_reconstruction(spec, mesh)
            norms = error_norms(sol, exact, "regular_part", config.reference_m)
            err_mu = abs(exact.mu - sol.mu_h)
        rows.append(
            LevelRow(k, m, 1.0 / m, norms.l2, norms.energy, norms.linf, err_mu)
        )
    return rows


def _fmt(value, spec: str = ".10e") -> str:
    if value is None:
        return ""
    v = float(value)
    if not math.isfinite(v):
        return ""
    return format(v, spec)


def emit_table(reports: list[ConvergenceReport], fmt: str = "csv") -> str:
    """Render reports as CSV (fixed column schema) or markdown."""
    if fmt == "csv":
        return _emit_csv(reports)
    if fmt == "markdown":
        return _emit_markdown(reports)
    raise ArgumentError(f"format must be csv or markdown, got {fmt!r}")


def _emit_csv(reports: list[ConvergenceReport]) -> str:
    out = io.StringIO()
    out.write(CSV_COLUMNS + "\n")
    for report in reports:
        alpha_txt = format(report.alpha, "g")
        if report.error is not None:
            # structured error row: alpha present, every other field empty
            out.write(alpha_txt + "," * (len(CSV_COLUMNS.split(",")) - 1) + "\n")
            continue
        rate_cols = {
            norm: report.rates_of(norm) for norm in ("l2", "energy", "linf", "mu")
        }
        exp = report.expected
        for idx, row in enumerate(report.rows):
            cells = [
                alpha_txt,
                str(row.k),
                _fmt(row.h),
                _fmt(row.err_l2),
                _fmt(row.err_energy),
                _fmt(row.err_linf),
                _fmt(row.err_mu),
            ]
            for norm in ("l2", "energy", "linf", "mu"):
                cells.append("" if idx == 0 else _fmt(rate_cols[norm][idx - 1], ".4f"))
            cells.append(_fmt(exp["l2"], ".4f"))
            cells.append(_fmt(exp["energy"], ".4f"))
            cells.append(_fmt(exp["linf"], ".4f"))
            out.write(",".join(cells) + "\n")
    return out.getvalue()


def _emit_markdown(reports: list[ConvergenceReport]) -> str:
    out = io.StringIO()
    for report in reports:
        head = (
            f"### alpha = {report.alpha:g}, method = {report.method}, "
            f"example = {report.example}, q = {report.q_label}"
        )
        if report.delta != 1.0:
            head += f", delta = {report.delta:g}"
        out.write(head + "\n\n")
        if report.error is not None:
            out.write(f"**failed**: {report.error}\n\n")
            continue
        ks = [str(r.k) for r in report.rows]
        out.write("| k | " + " | ".join(ks) + " | expected |\n")
        out.write("|---" * (len(ks) + 2) + "|\n")
        norms = [("l2", "L2"), ("energy", "energy"), ("linf", "Linf")]
        if any(r.err_mu is not None for r in report.rows):
            norms.append(("mu", "mu"))
        for norm, title in norms:
            errs = report.errors_of(norm)
            cells = [
                "" if not math.isfinite(e) else format(e, ".2e") for e in errs
            ]
            out.write(f"| err_{title} | " + " | ".join(cells) + " |  |\n")
            rr = report.rates_of(norm)
            rate_cells = [""] + [
                "" if not math.isfinite(r) else format(r, ".2f") for r in rr
            ]
            expected = report.expected.get(norm)
            exp_txt = "" if expected is None else format(expected, ".2f")
            out.write(f"| rate_{title} | " + " | ".join(rate_cells) + f" | {exp_txt} |\n")
        out.write("\n")
    return out.getvalue()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracfem",
        description="Convergence studies for fractional two-point boundary value problems.",
    )
    parser.add_argument("--config", help="JSON file with ExperimentConfig fields")
    parser.add_argument("--alpha", help="comma-separated fractional orders, e.g. 1.25,1.5,1.75")
    parser.add_argument("--example", choices=["a", "b", "c", "custom"], help="source choice")
    parser.add_argument("--q", help="potential: zero, x_times_1mx, or custom")
    parser.add_argument("--method", choices=list(_METHODS), help="discretization")
    parser.add_argument("--levels", help="mesh levels k_min:k_max (m = 2^k)")
    parser.add_argument("--graded", type=float, dest="delta", help="grading exponent delta >= 1")
    parser.add_argument("--reference-m", type=int, dest="reference_m", help="reference mesh size")
    parser.add_argument("--format", dest="fmt", choices=["csv", "markdown"], help="output format")
    parser.add_argument("--out", help="output path (defaults to stdout)")
    parser.add_argument("--f-expr", dest="f_expr", help="custom source expression")
    parser.add_argument("--f-hint", dest="f_hint", type=float, help="custom source singularity exponent at 0")
    parser.add_argument("--q-expr", dest="q_expr", help="custom potential expression")
    parser.add_argument("--q-hint", dest="q_hint", type=float, help="custom potential singularity exponent at 0")
    return parser


def _assemble_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        raw.update(_config_from_json(args.config))
    if "levels" in raw:
        raw["k_min"], raw["k_max"] = _parse_levels(str(raw.pop("levels")))
    if "q" in raw:
        raw["q_kind"] = raw.pop("q")
    if args.alpha is not None:
        raw["alphas"] = args.alpha
    if isinstance(raw.get("alphas"), str):
        raw["alphas"] = [float(tok) for tok in raw["alphas"].split(",") if tok]
    if "alphas" in raw:
        raw["alphas"] = tuple(float(a) for a in raw["alphas"])
    if args.levels is not None:
        raw["k_min"], raw["k_max"] = _parse_levels(args.levels)
    if args.q is not None:
        raw["q_kind"] = args.q
    for name in ("example", "method", "delta", "reference_m", "fmt", "out",
                 "f_expr", "f_hint", "q_expr", "q_hint"):
        value = getattr(args, name)
        if value is not None:
            raw[name] = value
    return ExperimentConfig(**raw)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _assemble_config(args)
        reports = run_experiment(config)
        text = emit_table(reports, config.fmt)
    except FracFemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = [r for r in reports if r.error is not None]
    for report in failed:
        print(f"alpha={report.alpha:g} failed: {report.error}", file=sys.stderr)
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
