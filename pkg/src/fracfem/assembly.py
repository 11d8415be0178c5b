"""Assembly of the stiffness, mass, and reconstruction coupling terms.

The leading block uses the closed form

    -(D_0^s phi_j, D_1^s phi_i) =
        -B(2-s, 2-s) * sum_{a_k < b_l} c_k d_l (b_l - a_k)^(3-2s)

obtained by integrating pairs of one-sided power functions, with s = alpha/2.
On uniform meshes the block is Toeplitz and is also reduced to a stencil.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ArgumentError,
    DegenerateSplittingError,
    DomainError,
    UnsupportedFormError,
)
from .fields import ScalarField
from .fraccalc import (
    FracOrder,
    PowerSum,
    QuadratureRule,
    beta_fn,
    gamma_fn,
    jacobi_left_panel,
    jacobi_right_panel,
    legendre_panel,
    rl_integral_powersum_at,
    weighted_endpoint_integral,
)
from .mesh import Mesh, hat_jump_data

DIRICHLET = "dirichlet"
MIXED = "mixed"

# Largest element count for which the dense leading block is materialized in
# the assembled system; larger uniform systems carry only the stencil.
DENSE_LIMIT_M = 1024

DEGENERATE_TOL = 1e-8

_MASS_POINTS = 6
_LOAD_POINTS = 10
_ENDPOINT_POINTS = 12


@dataclass(frozen=True)
class ProblemSpec:
    """Two-point problem -D_0^alpha u + q u = f with homogeneous conditions.

    ``bc == "dirichlet"`` imposes u(0) = u(1) = 0; ``bc == "mixed"`` imposes
    D_0^(alpha-1) u(0) = u(1) = 0 and needs alpha > 3/2.
    """

    alpha: float
    q: ScalarField
    f: ScalarField
    bc: str = DIRICHLET

    def __post_init__(self):
        order = FracOrder(self.alpha)
        if self.bc not in (DIRICHLET, MIXED):
            raise ArgumentError(f"bc must be 'dirichlet' or 'mixed', got {self.bc!r}")
        if self.bc == MIXED:
            order.require_mixed_range()
        sample = self.q(np.linspace(1e-3, 1.0 - 1e-3, 1000))
        if not np.all(np.isfinite(sample)) or np.max(np.abs(sample)) > 1e8:
            raise DomainError("potential q must be bounded on [0, 1]")

    @property
    def singular_exponent(self) -> float:
        """Exponent of the leading singular profile x^p."""
        return self.alpha - 1.0 if self.bc == DIRICHLET else self.alpha - 2.0


def _hat_geometry(mesh: Mesh):
    """Anchors (n, 3) and scaled jump coefficients (n, 3) of all interior hats."""
    nodes = mesh.nodes
    n = mesh.m - 1
    anchors = np.stack([nodes[0:n], nodes[1 : n + 1], nodes[2 : n + 2]], axis=1)
    widths = mesh.widths
    rise = 1.0 / widths[:n]
    fall = -1.0 / widths[1:]
    jumps = np.stack([rise, fall - rise, -fall], axis=1)
    return anchors, jumps


def assemble_lead(mesh: Mesh, alpha) -> np.ndarray:
    """Dense leading block A[i, j] = -(D_0^s phi_j, D_1^s phi_i), s = alpha/2.

    Entries are evaluated from the closed form term by term, independently of
    any Toeplitz structure, in row blocks to bound the working memory. The
    nine nearly cancelling products are accumulated in extended precision:
    on strongly graded meshes the jump coefficients reach 1/h_min and plain
    doubles lose most of the entry.
    """
    a = float(FracOrder(float(alpha)).alpha)
    s = 0.5 * a
    anchors, jumps = _hat_geometry(mesh)
    work = np.longdouble
    p = work(3.0 - 2.0 * s)
    anchors = anchors.astype(work)
    coeff = (jumps / gamma_fn(2.0 - s)).astype(work)
    bconst = work(beta_fn(2.0 - s, 2.0 - s))
    n = mesh.m - 1
    out = np.zeros((n, n))
    block = max(1, min(n, 8 * 1024 * 1024 // max(8 * n, 1)))
    for start in range(0, n, block):
        stop = min(start + block, n)
        acc = np.zeros((stop - start, n), dtype=work)
        for l in range(3):
            b_l = anchors[start:stop, l][:, None]
            d_l = coeff[start:stop, l][:, None]
            for k in range(3):
                gap = np.maximum(b_l - anchors[:, k][None, :], work(0.0))
                acc += (d_l * coeff[:, k][None, :]) * gap**p
        out[start:stop] = (-bconst * acc).astype(float)
    return out


def _bspline4(u: np.ndarray) -> np.ndarray:
    """Centered cubic B-spline on [-2, 2] (the Peano kernel of the 4th
    central difference)."""
    au = np.abs(u)
    return ((2.0 - au) ** 3 - 4.0 * np.maximum(1.0 - au, 0.0) ** 3) / 6.0


def lead_stencil(mesh: Mesh, alpha) -> np.ndarray:
    """Toeplitz stencil of the leading block on a uniform mesh.

    Returns ``st`` of length 2m - 3 with A[i, j] = st[j - i + m - 2]. The
    stencil value at offset d is a 4th central difference of t^(3-2s); past
    the kink region that difference cancels catastrophically in floating
    point, so it is evaluated there through its Peano-kernel integral

        sum_e v_e (e-d)^p = p(p-1)(p-2)(p-3) int M4(u) (u-d)^(p-4) du,

    which has a single-signed integrand.
    """
    if not mesh.is_uniform:
        raise ArgumentError("the leading block is Toeplitz on uniform meshes only")
    a = float(FracOrder(float(alpha)).alpha)
    s = 0.5 * a
    p = 3.0 - 2.0 * s
    n = mesh.m - 1
    h = 1.0 / mesh.m
    d = np.arange(-(n - 1), n, dtype=float)
    acc = np.zeros_like(d)
    near = np.abs(d) <= 2.0
    for e, v in zip(range(-2, 3), (1.0, -4.0, 6.0, -4.0, 1.0)):
        acc[near] += v * np.maximum(e - d[near], 0.0) ** p
    far = d <= -3.0
    if np.any(far):
        xi, w = legendre_panel(24, 0.0, 1.0)
        factor = p * (p - 1.0) * (p - 2.0) * (p - 3.0)
        total = np.zeros(int(np.sum(far)))
        for lo in (-2.0, -1.0, 0.0, 1.0):
            u = lo + xi
            total += (w * _bspline4(u)) @ (u[:, None] - d[far][None, :]) ** (p - 4.0)
        acc[far] = factor * total
    scale = beta_fn(2.0 - s, 2.0 - s) * h ** (1.0 - 2.0 * s) / gamma_fn(2.0 - s) ** 2
    return -scale * acc


def mass_bands(mesh: Mesh, q: ScalarField, points: int = _MASS_POINTS):
    """Symmetric tridiagonal (q phi_j, phi_i) as (diagonal, off-diagonal)."""
    n = mesh.m - 1
    if q.is_zero:
        return np.zeros(n), np.zeros(max(n - 1, 0))
    xi, w = legendre_panel(points, -1.0, 1.0)
    lo = mesh.nodes[:-1][:, None]
    widths = mesh.widths[:, None]
    x = lo + 0.5 * widths * (xi + 1.0)
    wq = 0.5 * widths * w
    qv = q(x)
    n_r = (x - lo) / widths
    n_l = 1.0 - n_r
    ll = np.sum(wq * qv * n_l * n_l, axis=1)
    lr = np.sum(wq * qv * n_l * n_r, axis=1)
    rr = np.sum(wq * qv * n_r * n_r, axis=1)
    diag = rr[:n] + ll[1:]
    off = lr[1:n]
    return diag, off


def assemble_mass_q(mesh: Mesh, q: ScalarField, points: int = _MASS_POINTS) -> np.ndarray:
    """Dense potential mass matrix (q phi_j, phi_i)."""
    diag, off = mass_bands(mesh, q, points)
    n = diag.size
    out = np.zeros((n, n))
    idx = np.arange(n)
    out[idx, idx] = diag
    if n > 1:
        out[idx[:-1], idx[:-1] + 1] = off
        out[idx[:-1] + 1, idx[:-1]] = off
    return out


def powersum_load(mesh: Mesh, ps: PowerSum) -> np.ndarray:
    """Exact load vector (ps, phi_i) for a left-anchored power sum."""
    if not ps.is_left:
        raise UnsupportedFormError("closed-form loads need left-anchored terms")
    nodes = mesh.nodes
    n = mesh.m - 1
    out = np.zeros(n)
    legs = (
        # rising leg of hat j on [x_{j-1}, x_j]
        (nodes[0:n], nodes[1 : n + 1], 1.0 / mesh.widths[:n], -nodes[0:n] / mesh.widths[:n]),
        # falling leg of hat j on [x_j, x_{j+1}]
        (
            nodes[1 : n + 1],
            nodes[2 : n + 2],
            -1.0 / mesh.widths[1:],
            nodes[2 : n + 2] / mesh.widths[1:],
        ),
    )
    for xl, xr, B, A in legs:
        for t in ps.terms:
            hi = xr - t.anchor
            active = hi > 0.0
            if not np.any(active):
                continue
            lo = np.maximum(np.maximum(t.anchor, xl) - t.anchor, 0.0)
            hi = np.maximum(hi, 0.0)
            j1 = (hi ** (t.exponent + 1.0) - lo ** (t.exponent + 1.0)) / (t.exponent + 1.0)
            j2 = (hi ** (t.exponent + 2.0) - lo ** (t.exponent + 2.0)) / (t.exponent + 2.0)
            out += np.where(active, t.coeff * ((A + B * t.anchor) * j1 + B * j2), 0.0)
    return out


def quadrature_load(mesh: Mesh, field: ScalarField, points: int = _LOAD_POINTS) -> np.ndarray:
    """Load vector by per-element Gauss rules; the first element uses a
    Gauss-Jacobi rule absorbing the declared singularity hint."""
    n = mesh.m - 1
    xi, w = legendre_panel(points, -1.0, 1.0)
    lo = mesh.nodes[:-1][:, None]
    widths = mesh.widths[:, None]
    x = lo + 0.5 * widths * (xi + 1.0)
    wq = 0.5 * widths * w
    fv = field(x)
    n_r = (x - lo) / widths
    rising = np.sum(wq * fv * n_r, axis=1)
    falling = np.sum(wq * fv * (1.0 - n_r), axis=1)
    if field.hint is not None:
        x1 = mesh.nodes[1]
        t, jw = jacobi_left_panel(2 * points, field.hint, 0.0, x1)
        smooth = field(t) * t ** (-field.hint)
        rising[0] = float(np.dot(jw, smooth * (t / x1)))
    out = rising[:n] + falling[1:]
    return out


def load_vector(mesh: Mesh, field: ScalarField, points: int = _LOAD_POINTS) -> np.ndarray:
    """Load vector (field, phi_i), exact when the field has a power-sum form."""
    if field.is_zero:
        return np.zeros(mesh.m - 1)
    if field.powersum is not None and field.powersum.is_left:
        return powersum_load(mesh, field.powersum)
    return quadrature_load(mesh, field, points)


def endpoint_weight_vector(
    mesh: Mesh, q: ScalarField, alpha, points: int = _ENDPOINT_POINTS
) -> np.ndarray:
    """Vector s with s_j = (I_0^alpha q phi_j)(1).

    This is the same endpoint-weighted functional that defines the splitting
    constant, evaluated on the basis; the element touching t = 1 absorbs the
    (1 - t)^(alpha - 1) weight into a Gauss-Jacobi rule.
    """
    a = float(FracOrder(float(alpha)).alpha)
    n = mesh.m - 1
    if q.is_zero:
        return np.zeros(n)
    xi, w = legendre_panel(points, -1.0, 1.0)
    lo = mesh.nodes[:-1][:, None]
    widths = mesh.widths[:, None]
    x = lo + 0.5 * widths * (xi + 1.0)
    wq = 0.5 * widths * w * (1.0 - x) ** (a - 1.0)
    qv = q(x)
    n_r = (x - lo) / widths
    rising = np.sum(wq * qv * n_r, axis=1)
    falling = np.sum(wq * qv * (1.0 - n_r), axis=1)
    # redo the last element with the weight absorbed exactly
    left = mesh.nodes[-2]
    t, jw = jacobi_right_panel(2 * points, a - 1.0, left, 1.0)
    width_last = 1.0 - left
    falling_last = float(np.dot(jw, q(t) * (1.0 - t) / width_last))
    out = rising[:n] + np.concatenate((falling[1:-1], [falling_last]))
    return out / gamma_fn(a)


@dataclass(frozen=True)
class SingularPair:
    """Splitting data u = u_r + mu * u_s for the reconstruction method.

    q_profile is Q(x) = c0 c1(x) - c0 q(x) u_s(x); f_tilde(x) = f(x) +
    (I^alpha f)(1) Q(x) is the modified source seen by the regular part.
    """

    u_s: PowerSum
    c0: float
    c1: PowerSum
    q_profile: ScalarField
    f_tilde: ScalarField
    f_frac_at_one: float
    singular_exponent: float


def _frac_integral_at_one(field: ScalarField, alpha: float) -> float:
    """(I_0^alpha field)(1), exact for power-sum fields."""
    if field.is_zero:
        return 0.0
    if field.powersum is not None and field.powersum.is_left:
        return float(rl_integral_powersum_at(alpha, field.powersum, 1.0))
    hint = field.hint or 0.0
    rule = QuadratureRule(kind="adaptive_composite", points=16, tol=1e-12, left_exponent=hint)
    return weighted_endpoint_integral(field.fn, alpha, rule)


def build_singular_pair(spec: ProblemSpec) -> SingularPair:
    """Construct the singular profile, splitting constant, and modified source.

    Raises DegenerateSplittingError when 1 + (I^alpha q u_s)(1) vanishes
    numerically; no alternative profile is selected automatically.
    """
    a = spec.alpha
    p_sing = spec.singular_exponent
    u_s = PowerSum.from_terms([(1.0, 0.0, p_sing), (-1.0, 0.0, 2.0)])
    c1 = PowerSum.monomial(-2.0 / gamma_fn(3.0 - a), 2.0 - a)

    q_us = None
    if spec.q.is_zero:
        q_us = PowerSum(())
    elif spec.q.powersum is not None and spec.q.powersum.is_zero_anchored:
        q_us = spec.q.powersum.multiply_zero_anchored(u_s)

    if q_us is not None:
        denom = 1.0 + float(rl_integral_powersum_at(a, q_us, 1.0))
    else:
        hint = (spec.q.hint or 0.0) + p_sing
        rule = QuadratureRule(
            kind="adaptive_composite", points=16, tol=1e-12, left_exponent=hint
        )
        denom = 1.0 + weighted_endpoint_integral(
            lambda t: spec.q(t) * u_s(t), a, rule
        )
    if abs(denom) < DEGENERATE_TOL:
        raise DegenerateSplittingError(
            "splitting constant is undefined for this potential", denom
        )
    c0 = 1.0 / denom

    f_at_one = _frac_integral_at_one(spec.f, a)

    q_fn = spec.q.fn
    u_s_fn = u_s.__call__
    c1_fn = c1.__call__

    def q_profile_fn(x):
        x = np.asarray(x, dtype=float)
        return c0 * c1_fn(x) - c0 * q_fn(x) * u_s_fn(x)

    q_profile_ps = None
    if q_us is not None:
        q_profile_ps = c1.scaled(c0) + q_us.scaled(-c0)
    q_hint = min(2.0 - a, (spec.q.hint or 0.0) + p_sing)
    q_profile = ScalarField(
        fn=q_profile_fn, hint=q_hint, powersum=q_profile_ps, label="Q"
    )

    f_fn = spec.f.fn

    def f_tilde_fn(x):
        x = np.asarray(x, dtype=float)
        return f_fn(x) + f_at_one * q_profile_fn(x)

    f_tilde_ps = None
    if q_profile_ps is not None and spec.f.powersum is not None and spec.f.powersum.is_left:
        f_tilde_ps = spec.f.powersum + q_profile_ps.scaled(f_at_one)
    f_hint = min(spec.f.hint if spec.f.hint is not None else 0.0, q_hint)
    f_tilde = ScalarField(fn=f_tilde_fn, hint=f_hint, powersum=f_tilde_ps, label="f~")

    return SingularPair(u_s, c0, c1, q_profile, f_tilde, f_at_one, p_sing)


@dataclass(frozen=True)
class AssembledSystem:
    """Discrete system for one mesh: leading block, potential mass, load,
    and for the reconstruction method the rank-one coupling r s^T."""

    mesh: Mesh
    alpha: float
    method: str
    bc: str
    A_lead: np.ndarray | None
    stencil: np.ndarray | None
    mass_diag: np.ndarray
    mass_off: np.ndarray
    load: np.ndarray
    r_vec: np.ndarray | None
    s_vec: np.ndarray | None
    pair: SingularPair | None
    toeplitz_tag: bool

    @property
    def n(self) -> int:
        return self.load.size

    @property
    def M_q(self) -> np.ndarray:
        """Dense potential mass matrix."""
        n = self.n
        out = np.zeros((n, n))
        idx = np.arange(n)
        out[idx, idx] = self.mass_diag
        if n > 1:
            out[idx[:-1], idx[:-1] + 1] = self.mass_off
            out[idx[:-1] + 1, idx[:-1]] = self.mass_off
        return out

    def mass_matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.mass_diag * x
        if self.n > 1:
            y[:-1] += self.mass_off * x[1:]
            y[1:] += self.mass_off * x[:-1]
        return y

    def lead_dense(self) -> np.ndarray:
        if self.A_lead is not None:
            return self.A_lead
        return stencil_to_dense(self.stencil)

    def full_matrix(self) -> np.ndarray:
        """Dense system matrix including the rank-one coupling."""
        out = self.lead_dense() + self.M_q
        if self.r_vec is not None:
            out = out + np.outer(self.r_vec, self.s_vec)
        return out


def stencil_to_dense(stencil: np.ndarray) -> np.ndarray:
    """Expand a Toeplitz stencil st (A[i, j] = st[j - i + n - 1]) to dense."""
    n = (stencil.size + 1) // 2
    from scipy.linalg import toeplitz

    return toeplitz(stencil[n - 1 :: -1], stencil[n - 1 :])


def assemble_system(spec: ProblemSpec, mesh: Mesh, method: str) -> AssembledSystem:
    """Assemble the discrete system for the standard or reconstruction method."""
    if method not in ("standard", "reconstruction"):
        raise ArgumentError(f"method must be 'standard' or 'reconstruction', got {method!r}")
    if method == "standard" and spec.bc == MIXED:
        raise ArgumentError(
            "the standard method needs Dirichlet conditions; "
            "use the reconstruction method for the mixed problem"
        )
    stencil = lead_stencil(mesh, spec.alpha) if mesh.is_uniform else None
    # graded meshes have no stencil, so they always carry the dense block;
    # uniform dense blocks come from the stencil so the materialized matrix
    # agrees with the Toeplitz matvec to the last bit
    if stencil is not None:
        dense = stencil_to_dense(stencil) if mesh.m <= DENSE_LIMIT_M else None
    else:
        dense = assemble_lead(mesh, spec.alpha)
    diag, off = mass_bands(mesh, spec.q)
    if method == "standard":
        load = load_vector(mesh, spec.f)
        return AssembledSystem(
            mesh, spec.alpha, method, spec.bc, dense, stencil, diag, off,
            load, None, None, None, mesh.is_uniform,
        )
    pair = build_singular_pair(spec)
    r_vec = load_vector(mesh, pair.q_profile)
    s_vec = endpoint_weight_vector(mesh, spec.q, spec.alpha)
    load = load_vector(mesh, spec.f) + pair.f_frac_at_one * r_vec
    return AssembledSystem(
        mesh, spec.alpha, method, spec.bc, dense, stencil, diag, off,
        load, r_vec, s_vec, pair, mesh.is_uniform,
    )
