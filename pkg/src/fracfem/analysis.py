"""Exact and reference solutions, error norms, and convergence reporting.

For q = 0 the solution has the closed form
    u = -I_0^alpha f + (I_0^alpha f)(1) x^(alpha-1)       (Dirichlet)
    u = -I_0^alpha f + (I_0^alpha f)(1) x^(alpha-2)       (mixed, alpha > 3/2)
so any source with a power-sum form yields an exact solution by the power
rule. With a potential, errors are measured against a reconstruction solve
on a fine uniform mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import DIRICHLET, MIXED, ProblemSpec, lead_stencil
from .errors import ArgumentError, UnsupportedSourceError
from .fraccalc import PowerSum, gamma_fn, rl_integral_powersum
from .mesh import Mesh, build_mesh
from .solver import ReconSolution, StandardSolution, solve_reconstruction, toeplitz_matvec

REFERENCE_M = 4096

_GAUSS_PER_CELL = 8


@dataclass(frozen=True)
class ExactSolution:
    """Exact (closed-form) or reference (fine-mesh) solution triple."""

    kind: str
    u: Callable
    u_r: Callable
    mu: float
    u_s: PowerSum
    alpha: float
    bc: str
    mesh: Mesh | None = None


def exact_q0(spec: ProblemSpec) -> ExactSolution:
    """Closed-form solution for q = 0 and a power-sum source."""
    if not spec.q.is_zero:
        raise ArgumentError("closed-form solutions require q = 0")
    ps = spec.f.powersum
    if ps is None or not ps.is_left:
        raise UnsupportedSourceError(
            f"source {spec.f.label!r} has no closed-form fractional integral"
        )
    frac = rl_integral_powersum(spec.alpha, ps)
    mu = float(frac(1.0))
    p_sing = spec.singular_exponent
    u = frac.scaled(-1.0) + PowerSum.monomial(mu, p_sing)
    u_r = frac.scaled(-1.0) + PowerSum.monomial(mu, 2.0)
    u_s = PowerSum.from_terms([(1.0, 0.0, p_sing), (-1.0, 0.0, 2.0)])
    return ExactSolution("closed_form", u, u_r, mu, u_s, spec.alpha, spec.bc)


_reference_cache: dict[tuple, ExactSolution] = {}


def reference_solution(spec: ProblemSpec, fine_m: int = REFERENCE_M) -> ExactSolution:
    """Reconstruction solve on a fine uniform mesh, packaged as a reference.

    The study meshes it serves should stay at least 8 times coarser.
    """
    if fine_m < 16:
        raise ArgumentError(f"reference mesh is too coarse, m={fine_m}")
    key = (spec.alpha, spec.bc, spec.f.label, spec.q.label, fine_m)
    hit = _reference_cache.get(key)
    if hit is not None:
        return hit
    mesh = build_mesh(fine_m)
    sol = solve_reconstruction(spec, mesh)
    out = ExactSolution(
        "reference", sol, sol.u_r_h, sol.mu_h, sol.pair.u_s, spec.alpha, spec.bc, mesh
    )
    _reference_cache[key] = out
    return out


_stencil_cache: dict[tuple, np.ndarray] = {}


def _energy_stencil(fine_m: int, alpha: float) -> np.ndarray:
    key = (fine_m, alpha)
    hit = _stencil_cache.get(key)
    if hit is None:
        hit = lead_stencil(build_mesh(fine_m), alpha)
        _stencil_cache[key] = hit
    return hit


@dataclass(frozen=True)
class ErrorNorms:
    l2: float
    energy: float
    linf: float


def error_norms(
    approx: StandardSolution | ReconSolution,
    exact: ExactSolution,
    which_field: str = "full_u",
    fine_m: int = REFERENCE_M,
) -> ErrorNorms:
    """L2, energy, and sampled-sup errors of the chosen field.

    L2 and the sup are taken over the union refinement of the approximation
    mesh and a fine sampling grid, with Gauss points in every cell; the
    energy norm is the quadratic form of the leading block on the fine grid
    interpolant of the error, so it reflects the |.|_(alpha/2) seminorm.
    """
    if which_field not in ("full_u", "regular_part"):
        raise ArgumentError(f"unknown field selector {which_field!r}")
    if which_field == "regular_part":
        if not isinstance(approx, ReconSolution):
            raise ArgumentError("regular_part errors need a reconstruction solution")
        approx_fn, exact_fn = approx.u_r_h, exact.u_r
    else:
        approx_fn, exact_fn = approx, exact.u

    fine_mesh = exact.mesh if exact.mesh is not None else build_mesh(fine_m)
    union = np.union1d(approx.mesh.nodes, fine_mesh.nodes)

    xi, w = np.polynomial.legendre.leggauss(_GAUSS_PER_CELL)
    lo = union[:-1][:, None]
    widths = np.diff(union)[:, None]
    x = lo + 0.5 * widths * (xi + 1.0)
    wq = 0.5 * widths * w

    gap = exact_fn(x) - approx_fn(x)
    l2 = float(np.sqrt(np.sum(wq * gap * gap)))

    interior = union[1:-1]
    node_gap = exact_fn(interior) - approx_fn(interior)
    linf = max(float(np.max(np.abs(gap))), float(np.max(np.abs(node_gap))))

    fine_interior = fine_mesh.nodes[1:-1]
    d = exact_fn(fine_interior) - approx_fn(fine_interior)
    stencil = _energy_stencil(fine_mesh.m, exact.alpha)
    quad_form = float(np.dot(d, toeplitz_matvec(stencil, d)))
    energy = math.sqrt(max(quad_form, 0.0))

    return ErrorNorms(l2, energy, linf)


def rates(errors) -> np.ndarray:
    """Observed orders log2(e_k / e_{k+1}) on successively halved meshes.

    Non-positive or non-finite entries yield NaN for the affected ratios
    rather than raising.
    """
    e = np.asarray(errors, dtype=float)
    out = np.full(max(e.size - 1, 0), np.nan)
    for i in range(e.size - 1):
        if e[i] > 0.0 and e[i + 1] > 0.0 and np.isfinite(e[i]) and np.isfinite(e[i + 1]):
            out[i] = math.log2(e[i] / e[i + 1])
    return out


def green_q0(alpha: float, x: float, y) -> np.ndarray:
    """Green's function of the Dirichlet problem with q = 0:

    G(x, y) = [ (1-y)^(alpha-1) x^(alpha-1) - ((x-y)_+)^(alpha-1) ] / Gamma(alpha).
    """
    y = np.asarray(y, dtype=float)
    lead = (1.0 - y) ** (alpha - 1.0) * x ** (alpha - 1.0)
    return (lead - np.maximum(x - y, 0.0) ** (alpha - 1.0)) / gamma_fn(alpha)


def expected_rates(alpha: float, method: str, bc: str, gamma_smooth: float) -> dict:
    """Theoretical convergence exponents in the sup-limit beta -> 1/2.

    gamma_smooth is the Sobolev regularity index of the source; the map
    l = min(alpha - 1 + beta, gamma) (Dirichlet) or
    l_n = min(alpha - 2 + beta, gamma) (mixed) feeds the regular-part bounds.
    """
    beta = 0.5
    if method == "standard":
        rate = alpha - 2.0 + 2.0 * beta
        return {"l2": rate, "energy": 0.5 * alpha - 1.0 + beta, "linf": rate, "mu": None}
    shift = alpha - 1.0 + beta if bc == DIRICHLET else alpha - 2.0 + beta
    ell = min(shift, gamma_smooth)
    graph = min(2.0, alpha + ell)
    rate = graph - 1.0 + beta
    return {"l2": rate, "energy": graph - 0.5 * alpha, "linf": rate, "mu": rate}


@dataclass
class LevelRow:
    """Errors of one study level."""

    k: int
    m: int
    h: float
    err_l2: float
    err_energy: float
    err_linf: float
    err_mu: float | None


@dataclass
class ConvergenceReport:
    """Per-alpha convergence study: level rows plus observed/expected rates."""

    alpha: float
    method: str
    bc: str
    example: str
    q_label: str
    delta: float
    expected: dict
    rows: list[LevelRow] = field(default_factory=list)
    error: str | None = None

    def errors_of(self, norm: str) -> np.ndarray:
        return np.array(
            [np.nan if getattr(r, f"err_{norm}") is None else getattr(r, f"err_{norm}") for r in self.rows]
        )

    def rates_of(self, norm: str) -> np.ndarray:
        return rates(self.errors_of(norm))
