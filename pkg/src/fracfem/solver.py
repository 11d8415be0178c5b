"""Direct and iterative solution of the assembled systems.

Small systems are solved by dense LU on the full matrix. Large uniform
systems exploit the Toeplitz leading block: the rank-one reconstruction
coupling is folded in through the Sherman-Morrison identity so only
A_lead + M_q is factored, and residuals use an FFT matvec.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres

from .assembly import (
    DENSE_LIMIT_M,
    AssembledSystem,
    ProblemSpec,
    SingularPair,
    assemble_system,
)
from .errors import ArgumentError, IterativeFailure, SingularSystemError
from .mesh import Mesh, PwLinear

# backward-error tolerance: |Ax - b| measured against |A||x| + |b|
RESIDUAL_TOL = 1e-12
PIVOT_TOL = 1e-14

_GMRES_RESTART = 50
_GMRES_MAX_INNER = 2000


@dataclass(frozen=True)
class StandardSolution:
    """Galerkin solution u_h of the standard method."""

    u_h: PwLinear
    residual: float

    def __call__(self, x):
        return self.u_h(x)

    @property
    def mesh(self) -> Mesh:
        return self.u_h.mesh


@dataclass(frozen=True)
class ReconSolution:
    """Reconstruction solution u_h = u_r_h + mu_h * u_s."""

    u_r_h: PwLinear
    mu_h: float
    pair: SingularPair
    residual: float

    def __call__(self, x):
        return self.u_r_h(x) + self.mu_h * self.pair.u_s(x)

    @property
    def mesh(self) -> Mesh:
        return self.u_r_h.mesh


def toeplitz_matvec(stencil: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Multiply the Toeplitz matrix A[i, j] = stencil[j - i + n - 1] by x.

    The product is a linear convolution, evaluated by circulant embedding in
    a power-of-two FFT length.
    """
    stencil = np.asarray(stencil, dtype=float)
    x = np.asarray(x, dtype=float)
    n = x.size
    if stencil.size != 2 * n - 1:
        raise ArgumentError(
            f"stencil length {stencil.size} does not match vector size {n}"
        )
    kernel = stencil[::-1]
    length = 1 << (2 * n - 1).bit_length()
    conv = np.fft.irfft(
        np.fft.rfft(kernel, length) * np.fft.rfft(x, length), length
    )
    return conv[n - 1 : 2 * n - 1]


def system_matvec(system: AssembledSystem, x: np.ndarray) -> np.ndarray:
    """Matrix-vector product with the full system matrix."""
    if system.stencil is not None:
        y = toeplitz_matvec(system.stencil, x)
    else:
        y = system.A_lead @ x
    y = y + system.mass_matvec(x)
    if system.r_vec is not None:
        y = y + system.r_vec * float(np.dot(system.s_vec, x))
    return y


def _lead_plus_mass_dense(system: AssembledSystem) -> np.ndarray:
    """A_lead + M_q in Fortran order so LU can factor in place."""
    n = system.n
    if system.A_lead is not None:
        out = np.asfortranarray(system.A_lead.copy())
    else:
        out = np.empty((n, n), order="F")
        rev = system.stencil[::-1]
        for j in range(n):
            out[:, j] = rev[n - 1 - j : 2 * n - 1 - j]
    idx = np.arange(n)
    out[idx, idx] += system.mass_diag
    if n > 1:
        out[idx[:-1], idx[:-1] + 1] += system.mass_off
        out[idx[:-1] + 1, idx[:-1]] += system.mass_off
    return out


def _factor(matrix: np.ndarray):
    scale = float(np.max(np.abs(matrix)))
    lu, piv = lu_factor(matrix, overwrite_a=True, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or np.min(pivots) < PIVOT_TOL * scale:
        raise SingularSystemError(
            f"assembled system is numerically singular "
            f"(pivot ratio {np.min(pivots) / max(scale, 1e-300):.3e})"
        )
    return lu, piv


def _norm_inf_estimate(system: AssembledSystem) -> float:
    """Upper bound on the row sums of the assembled matrix."""
    if system.stencil is not None:
        lead = float(np.sum(np.abs(system.stencil)))
    else:
        lead = float(np.max(np.sum(np.abs(system.A_lead), axis=1)))
    mass = float(np.max(np.abs(system.mass_diag))) + 2.0 * float(
        np.max(np.abs(system.mass_off), initial=0.0)
    )
    rank_one = 0.0
    if system.r_vec is not None:
        rank_one = float(np.max(np.abs(system.r_vec))) * float(
            np.sum(np.abs(system.s_vec))
        )
    return lead + mass + rank_one


def _relative_residual(system: AssembledSystem, coeffs: np.ndarray) -> float:
    """Normwise backward error |Ax - b|_inf / (|A|_inf |x|_inf + |b|_inf)."""
    scale = _norm_inf_estimate(system) * float(np.max(np.abs(coeffs), initial=0.0))
    scale += float(np.max(np.abs(system.load), initial=0.0))
    if scale == 0.0:
        return 0.0
    gap = system_matvec(system, coeffs) - system.load
    return float(np.max(np.abs(gap))) / scale


class _ShermanMorrison:
    """Solve (K0 + r s^T) x = b given an LU factorization of K0."""

    def __init__(self, lu_piv, r_vec, s_vec):
        self.lu_piv = lu_piv
        self.s_vec = s_vec
        self.y = lu_solve(lu_piv, r_vec)
        self.denom = 1.0 + float(np.dot(s_vec, self.y))
        if abs(self.denom) < 1e-12:
            raise SingularSystemError(
                "rank-one update makes the reconstruction system singular"
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x0 = lu_solve(self.lu_piv, rhs)
        return x0 - self.y * (float(np.dot(self.s_vec, x0)) / self.denom)


def _solve_coefficients(system: AssembledSystem) -> tuple[np.ndarray, float]:
    """LU solve with a residual check and one step of refinement."""
    use_full_dense = system.n <= DENSE_LIMIT_M - 1 or system.A_lead is not None
    if system.r_vec is None or not use_full_dense:
        base = _lead_plus_mass_dense(system)
        if system.r_vec is None:
            lu_piv = _factor(base)
            solver = lambda rhs: lu_solve(lu_piv, rhs)
        else:
            solver = _ShermanMorrison(
                _factor(base), system.r_vec, system.s_vec
            ).solve
    else:
        full = np.asfortranarray(system.full_matrix())
        lu_piv = _factor(full)
        solver = lambda rhs: lu_solve(lu_piv, rhs)

    coeffs = solver(system.load)
    res = _relative_residual(system, coeffs)
    if res > RESIDUAL_TOL:
        gap = system.load - system_matvec(system, coeffs)
        coeffs = coeffs + solver(gap)
        res = _relative_residual(system, coeffs)
        if res > RESIDUAL_TOL:
            raise SingularSystemError(
                f"solver residual {res:.3e} exceeds {RESIDUAL_TOL:.1e}"
            )
    return coeffs, res


def solve_standard(system: AssembledSystem) -> StandardSolution:
    """Solve the standard Galerkin system by LU."""
    if system.method != "standard":
        raise ArgumentError("solve_standard needs a system assembled as 'standard'")
    coeffs, res = _solve_coefficients(system)
    return StandardSolution(PwLinear(system.mesh, coeffs), res)


def reconstruction_scalar(system: AssembledSystem, coeffs: np.ndarray) -> float:
    """mu_h = c0 [ (I^alpha f)(1) - s . coeffs ].

    By linearity s . coeffs equals (I^alpha q u_r_h)(1) with the same
    endpoint-weighted quadrature that defined the splitting constant.
    """
    pair = system.pair
    return pair.c0 * (pair.f_frac_at_one - float(np.dot(system.s_vec, coeffs)))


def solve_reconstruction(spec: ProblemSpec, mesh: Mesh) -> ReconSolution:
    """Assemble and solve the reconstruction system, then recover mu_h."""
    system = assemble_system(spec, mesh, "reconstruction")
    coeffs, res = _solve_coefficients(system)
    mu_h = reconstruction_scalar(system, coeffs)
    return ReconSolution(PwLinear(mesh, coeffs), mu_h, system.pair, res)


def solve_iterative(system: AssembledSystem, tol: float = 1e-12):
    """Solve by restarted GMRES on the structured matvec.

    Returns the same solution type as the direct path. Raises
    IterativeFailure when the residual target is not reached within the
    iteration budget.
    """
    op = LinearOperator(
        (system.n, system.n),
        matvec=lambda x: system_matvec(system, np.asarray(x, dtype=float)),
    )
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    coeffs, info = gmres(
        op,
        system.load,
        rtol=tol,
        atol=0.0,
        restart=_GMRES_RESTART,
        maxiter=_GMRES_MAX_INNER // _GMRES_RESTART,
        callback=count,
        callback_type="pr_norm",
    )
    if info != 0:
        res = _relative_residual(system, coeffs)
        raise IterativeFailure("GMRES did not converge", iterations, res)
    res = _relative_residual(system, coeffs)
    if system.method == "standard":
        return StandardSolution(PwLinear(system.mesh, coeffs), res)
    mu_h = reconstruction_scalar(system, coeffs)
    return ReconSolution(PwLinear(system.mesh, coeffs), mu_h, system.pair, res)
