"""Assembly of the leading block, mass, loads, and the singular splitting."""

import numpy as np
import pytest

from fracfem.assembly import (
    ProblemSpec,
    assemble_lead,
    assemble_mass_q,
    assemble_system,
    build_singular_pair,
    endpoint_weight_vector,
    lead_stencil,
    load_vector,
    mass_bands,
    stencil_to_dense,
)
from fracfem.errors import ArgumentError, DegenerateSplittingError, DomainError
from fracfem.fields import (
    ScalarField,
    source_bump,
    source_inverse_quartic,
    source_step,
    zero_field,
)
from fracfem.mesh import build_mesh
from fracfem.solver import system_matvec

from .oracles import (
    endpoint_weight_entry_quad,
    hat_value,
    load_entry_quad,
    stiffness_entry_quad,
)

# nested adaptive quadrature of -(D^s phi_j, D^s phi_i), frozen
LEAD_M4_UNIFORM_A15 = np.array(
    [
        [1.7626379002274635, -1.5045055561273548, 0.0],
        [0.17686376991696084, 1.7626379002274644, -1.5045055561273548],
        [-0.2797674084142083, 0.17686376991695907, 1.7626379002274666],
    ]
)
LEAD_M4_GRADED2_A125 = np.array(
    [
        [0.7478924193063379, -0.9448580650133099, 0.0],
        [0.6440790738670761, 0.5745847501384665, -0.8315806726221094],
        [-0.1042617776095373, 0.5296093888041278, 0.5115270294646883],
    ]
)


def test_single_element_entry_frozen():
    # m = 2, alpha = 1.5: one interior basis function
    A = assemble_lead(build_mesh(2), 1.5)
    assert A.shape == (1, 1)
    assert A[0, 0] == pytest.approx(1.246373212027256, rel=1e-10)


def test_lead_matches_quadrature_oracle_uniform():
    A = assemble_lead(build_mesh(4), 1.5)
    np.testing.assert_allclose(A, LEAD_M4_UNIFORM_A15, rtol=1e-8, atol=1e-8)


def test_lead_matches_quadrature_oracle_graded():
    A = assemble_lead(build_mesh(4, delta=2.0), 1.25)
    np.testing.assert_allclose(A, LEAD_M4_GRADED2_A125, rtol=1e-8, atol=1e-8)


def test_lead_quadrature_oracle_recomputed_spot():
    # one live nested-quad entry per mesh family guards the frozen arrays
    nodes = build_mesh(4).nodes
    assert stiffness_entry_quad(nodes, 1.5, 2, 1) == pytest.approx(
        LEAD_M4_UNIFORM_A15[1, 0], rel=1e-9
    )
    nodes = build_mesh(4, delta=2.0).nodes
    assert stiffness_entry_quad(nodes, 1.25, 3, 2) == pytest.approx(
        LEAD_M4_GRADED2_A125[2, 1], rel=1e-9
    )


def test_uniform_lead_is_toeplitz_with_zero_upper_band():
    A = assemble_lead(build_mesh(16), 1.6)
    scale = np.max(np.abs(A))
    for d in range(-14, 15):
        diag = np.diagonal(A, offset=d)
        assert np.max(np.abs(diag - diag[0])) <= 1e-12 * scale
    # basis functions two or more elements apart have disjoint supports
    assert np.max(np.abs(np.triu(A, k=2))) == 0.0


@pytest.mark.parametrize("alpha", [1.25, 1.5, 1.75])
def test_stencil_agrees_with_dense(alpha):
    mesh = build_mesh(32)
    A = assemble_lead(mesh, alpha)
    B = stencil_to_dense(lead_stencil(mesh, alpha))
    assert np.max(np.abs(A - B)) <= 1e-12 * np.max(np.abs(A))


def test_stencil_far_field_frozen():
    # direct 4th differences in 80-bit floats at m = 64, alpha = 1.5
    st = lead_stencil(build_mesh(64), 1.5)
    frozen = {
        0: 7.050551600909808,
        1: -6.018022224509401,
        -1: 0.7074550796678998,
        -5: -0.06437537564526956,
        -40: -0.00033482853002428945,
    }
    for d, v in frozen.items():
        assert st[d + 62] == pytest.approx(v, rel=1e-10)
    # positive offsets beyond the coupling band vanish identically
    assert np.all(st[64:] == 0.0)


def test_stencil_requires_uniform_mesh():
    with pytest.raises(ArgumentError):
        lead_stencil(build_mesh(8, delta=2.0), 1.5)


# --- mass and loads ------------------------------------------------------------


def test_mass_bands_frozen_values():
    # quad of t(1-t) phi_i phi_j on m = 4; the integrands are quartic
    diag, off = mass_bands(build_mesh(4), source_bump())
    np.testing.assert_allclose(
        diag, [0.030208333333333337, 0.040625, 0.03020833333333333], rtol=1e-13
    )
    np.testing.assert_allclose(
        off, [0.009635416666666665, 0.009635416666666667], rtol=1e-13
    )
    full = assemble_mass_q(build_mesh(4), source_bump())
    assert full[0, 1] == full[1, 0] == pytest.approx(off[0], rel=1e-14)
    assert np.max(np.abs(np.triu(full, k=2))) == 0.0


def test_mass_zero_potential():
    diag, off = mass_bands(build_mesh(8), zero_field())
    assert not diag.any() and not off.any()


def test_mass_matches_quadrature_on_graded_mesh():
    mesh = build_mesh(5, delta=2.0)
    q = source_bump()
    diag, off = mass_bands(mesh, q)
    for j in (1, 3):
        phi = hat_value(mesh.nodes, j)
        got = load_entry_quad(mesh.nodes, lambda t: q.fn(t) * phi(t), j)
        assert diag[j - 1] == pytest.approx(got, rel=1e-10)
    phi1 = hat_value(mesh.nodes, 1)
    got = load_entry_quad(mesh.nodes, lambda t: q.fn(t) * phi1(t), 2)
    assert off[0] == pytest.approx(got, rel=1e-10)


def test_load_inverse_quartic_frozen():
    out = load_vector(build_mesh(4), source_inverse_quartic())
    np.testing.assert_allclose(
        out,
        [0.36731454005041797, 0.2993687673834674, 0.2694418451785009],
        rtol=1e-10,
    )


@pytest.mark.parametrize("field,breaks,left_exp", [
    (source_bump(), (), 0.0),
    (source_step(), (0.5,), 0.0),
    (source_inverse_quartic(), (), -0.25),
])
def test_load_matches_quadrature(field, breaks, left_exp):
    mesh = build_mesh(8, delta=1.5)
    out = load_vector(mesh, field)
    for j in (1, 4, 8 - 1):
        oracle = load_entry_quad(
            mesh.nodes, field.fn, j, left_exponent=left_exp, breaks=breaks
        )
        assert out[j - 1] == pytest.approx(oracle, rel=1e-9, abs=1e-14)


def test_quadrature_load_path_without_powersum():
    # a field carrying only a callable exercises the Gauss fallback
    mesh = build_mesh(16)
    smooth = ScalarField(fn=lambda x: np.sin(np.pi * np.asarray(x)), hint=None)
    out = load_vector(mesh, smooth)
    for j in (1, 8, 15):
        oracle = load_entry_quad(mesh.nodes, smooth.fn, j)
        assert out[j - 1] == pytest.approx(oracle, rel=1e-9)


def test_endpoint_weight_vector_frozen():
    s = endpoint_weight_vector(build_mesh(4), source_bump(), 1.5)
    np.testing.assert_allclose(
        s,
        [0.04231542832479732, 0.0475486405345039, 0.025988141759332364],
        rtol=1e-10,
    )


def test_endpoint_weight_vector_matches_quadrature():
    mesh = build_mesh(8)
    alpha = 1.75
    q = source_bump()
    s = endpoint_weight_vector(mesh, q, alpha)
    for j in (1, 5, 7):
        oracle = endpoint_weight_entry_quad(mesh.nodes, q.fn, j, alpha)
        assert s[j - 1] == pytest.approx(oracle, rel=1e-10)
    assert not endpoint_weight_vector(mesh, zero_field(), alpha).any()


# --- problem validation ----------------------------------------------------------


def test_problem_spec_validation():
    with pytest.raises(DomainError):
        ProblemSpec(alpha=2.0, q=zero_field(), f=source_bump())
    with pytest.raises(DomainError):
        ProblemSpec(alpha=1.25, q=zero_field(), f=source_bump(), bc="mixed")
    with pytest.raises(ArgumentError):
        ProblemSpec(alpha=1.5, q=zero_field(), f=source_bump(), bc="periodic")
    # an unbounded potential is rejected up front
    blowup = ScalarField(fn=lambda x: np.asarray(x, dtype=float) ** -4.0)
    with pytest.raises(DomainError):
        ProblemSpec(alpha=1.5, q=blowup, f=source_bump())


def test_singular_exponent_by_condition():
    spec = ProblemSpec(alpha=1.25, q=zero_field(), f=source_bump())
    assert spec.singular_exponent == pytest.approx(0.25)
    spec = ProblemSpec(alpha=1.75, q=zero_field(), f=source_bump(), bc="mixed")
    assert spec.singular_exponent == pytest.approx(-0.25)


# --- singular splitting ------------------------------------------------------------


def test_splitting_without_potential_is_trivial():
    spec = ProblemSpec(alpha=1.5, q=zero_field(), f=source_bump())
    pair = build_singular_pair(spec)
    assert pair.c0 == 1.0
    # (I^1.5 t(1-t))(1), frozen from adaptive quadrature of the convolution
    assert pair.f_frac_at_one == pytest.approx(0.12895761909663, rel=1e-9)
    xs = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(pair.u_s(xs), xs**0.5 - xs**2, rtol=1e-14, atol=1e-15)
    assert pair.u_s(1.0) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "alpha,frozen_mu",
    [(1.25, 0.15087352496695208), (1.5, 0.12895761909663), (1.75, 0.1055093577824017)],
)
def test_strength_scale_matches_quadrature(alpha, frozen_mu):
    spec = ProblemSpec(alpha=alpha, q=zero_field(), f=source_bump())
    assert build_singular_pair(spec).f_frac_at_one == pytest.approx(frozen_mu, rel=1e-9)


def test_splitting_constant_with_potential_frozen():
    spec = ProblemSpec(alpha=1.5, q=source_bump(), f=source_bump())
    pair = build_singular_pair(spec)
    # 1 / (1 + quad of (1-t)^0.5 q(t)(t^0.5 - t^2) / Gamma(1.5))
    assert pair.c0 == pytest.approx(0.9507318209834486, rel=1e-10)


def test_splitting_constant_quadrature_and_closed_form_agree():
    # same constant through the power-sum route and the adaptive route
    alpha = 1.6
    q_closed = source_bump()
    q_callable = ScalarField(fn=q_closed.fn, hint=None)
    c_closed = build_singular_pair(
        ProblemSpec(alpha=alpha, q=q_closed, f=source_bump())
    ).c0
    c_quad = build_singular_pair(
        ProblemSpec(alpha=alpha, q=q_callable, f=source_bump())
    ).c0
    assert c_closed == pytest.approx(c_quad, rel=1e-10)


def test_mixed_profile_and_modified_source():
    spec = ProblemSpec(alpha=1.75, q=source_bump(), f=source_bump(), bc="mixed")
    pair = build_singular_pair(spec)
    assert pair.singular_exponent == pytest.approx(-0.25)
    x = np.array([0.3, 0.7])
    # Q = c0 c1 - c0 q u_s and f~ = f + (I^a f)(1) Q, checked pointwise
    expect_q = pair.c0 * (pair.c1(x) - spec.q(x) * pair.u_s(x))
    np.testing.assert_allclose(pair.q_profile(x), expect_q, rtol=1e-13)
    expect_ft = spec.f(x) + pair.f_frac_at_one * expect_q
    np.testing.assert_allclose(pair.f_tilde(x), expect_ft, rtol=1e-13)
    assert pair.f_tilde.powersum is not None
    np.testing.assert_allclose(pair.f_tilde.powersum(x), expect_ft, rtol=1e-12)


def test_degenerate_splitting_detected():
    # scale the potential so 1 + (I^alpha q u_s)(1) crosses zero
    gamma = -1.0 / 0.051821321143524765
    ps = source_bump().powersum.scaled(gamma)
    q = ScalarField(fn=ps.__call__, powersum=ps, label="scaled bump")
    spec = ProblemSpec(alpha=1.5, q=q, f=source_bump())
    with pytest.raises(DegenerateSplittingError):
        build_singular_pair(spec)


# --- assembled system ---------------------------------------------------------------


def test_assembled_system_structure():
    spec = ProblemSpec(alpha=1.5, q=source_bump(), f=source_bump())
    mesh = build_mesh(32)
    system = assemble_system(spec, mesh, "reconstruction")
    n = system.n
    assert n == 31
    # rank-one coupling: the full matrix minus lead and mass has one singular value
    gap = system.full_matrix() - system.lead_dense() - system.M_q
    sv = np.linalg.svd(gap, compute_uv=False)
    assert sv[1] / sv[0] < 1e-10
    # structured matvec equals the dense product
    rng = np.random.default_rng(7)
    x = rng.standard_normal(n)
    np.testing.assert_allclose(
        system_matvec(system, x), system.full_matrix() @ x, rtol=1e-11, atol=1e-13
    )
    np.testing.assert_allclose(system.mass_matvec(x), system.M_q @ x, rtol=1e-13)


def test_recon_load_includes_profile_term():
    spec = ProblemSpec(alpha=1.5, q=source_bump(), f=source_bump())
    mesh = build_mesh(8)
    system = assemble_system(spec, mesh, "reconstruction")
    base = load_vector(mesh, spec.f)
    profile = load_vector(mesh, system.pair.q_profile)
    np.testing.assert_allclose(
        system.load, base + system.pair.f_frac_at_one * profile, rtol=1e-12
    )
    np.testing.assert_allclose(system.r_vec, profile, rtol=1e-15)


def test_standard_method_rejects_mixed_conditions():
    spec = ProblemSpec(alpha=1.75, q=zero_field(), f=source_bump(), bc="mixed")
    with pytest.raises(ArgumentError):
        assemble_system(spec, build_mesh(8), "standard")
    with pytest.raises(ArgumentError):
        assemble_system(spec, build_mesh(8), "petrov")


def test_dense_block_presence_by_size_and_grading():
    spec = ProblemSpec(alpha=1.5, q=zero_field(), f=source_bump())
    small = assemble_system(spec, build_mesh(64), "standard")
    assert small.A_lead is not None and small.stencil is not None
    big = assemble_system(spec, build_mesh(2048), "standard")
    assert big.A_lead is None and big.stencil is not None
    graded = assemble_system(spec, build_mesh(64, delta=2.0), "standard")
    assert graded.A_lead is not None and graded.stencil is None
