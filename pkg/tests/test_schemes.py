from dataclasses import replace

import numpy as np
import pytest

from entverify.config import Config
from entverify.errors import (
    DimensionMismatchError,
    InvalidBijectionError,
    InvalidCertificateError,
    NonMinimalDilationError,
    NormalizationError,
    NotAnIsometryError,
    ShapeMismatchError,
)
from entverify.services.algebra import MultimatrixAlgebra, ResourceState
from entverify.services.channel import (
    choi_distance,
    identity_channel,
    is_trace_preserving,
    minimal_dilation,
    transform_environment,
)
from entverify.services.diagram import unitarity_residuals
from entverify.services.linalg import haar_unitary
from entverify.services.schemes import (
    as_quantum_bijection,
    biunitarity,
    candidate_inverse_maxent,
    check_entanglement_pair,
    check_qbij_equations,
    compose_qbij,
    construct_qbij,
    dimension_inequalities,
    direct_sum_qbij,
    entanglement_inverse_maxent,
    entanglement_left_inverse,
    extend_left_inverse,
    is_entanglement_invertible,
    is_entanglement_reversible,
    is_intertwiner,
    kappa_composite,
    reduce_by_omega,
)
from entverify.services.ueb import dense_coding_channel, random_ueb, teleportation_channel, weyl_basis

from builders import (
    bell,
    dephasing,
    embedding_channel,
    padded_teleportation,
    random_omega,
    trace_out_channel,
    unitary_omega,
)


# ----------------------------------------------------------------------
# Biunitarity
# ----------------------------------------------------------------------
def test_teleportation_is_biunitary(teleport):
    report = biunitarity(minimal_dilation(teleport), h=2)
    assert report.verdict
    assert max(report.isometry_residuals + report.coisometry_residuals) < 1e-10


def test_padded_teleportation_fails_only_coisometry():
    d = minimal_dilation(padded_teleportation(weyl_basis(2)))
    report = biunitarity(d)
    assert not report
    assert max(report.isometry_residuals) < 1e-10
    assert report.coisometry_residuals[0] < 1e-10
    assert report.coisometry_residuals[1] == pytest.approx(1.0)


def test_biunitarity_needs_minimal_dilation(teleport):
    d = minimal_dilation(teleport)
    padded = transform_environment(d, {(j, 0): np.eye(2)[:, :1] for j in range(4)})
    with pytest.raises(NonMinimalDilationError):
        biunitarity(padded)
    with pytest.raises(ShapeMismatchError):
        biunitarity(d, h=3)


def test_equations_agree_with_biunitarity(teleport, dense):
    for c in (teleport, dense, identity_channel(MultimatrixAlgebra((1, 2)))):
        d = minimal_dilation(c)
        assert bool(check_qbij_equations(d)) == bool(biunitarity(d))
    d = minimal_dilation(padded_teleportation(weyl_basis(2)))
    eq = check_qbij_equations(d)
    assert not eq
    assert eq.unit == pytest.approx(1.0)


def test_as_quantum_bijection_rejects(teleport):
    with pytest.raises(DimensionMismatchError):
        as_quantum_bijection(embedding_channel(np.eye(3)[:, :2]))
    with pytest.raises(InvalidBijectionError):
        as_quantum_bijection(dephasing(2))


# ----------------------------------------------------------------------
# Inverses against the maximally entangled state
# ----------------------------------------------------------------------
def test_maxent_inverse_of_teleportation_is_dense_coding(teleport, dense, bell2):
    q = as_quantum_bijection(teleport)
    n = entanglement_inverse_maxent(q)
    assert choi_distance(n, dense) < 1e-9
    pair = check_entanglement_pair(teleport, n, bell2)
    assert max(pair) < 1e-9


def test_inverse_of_inverse(teleport):
    q = as_quantum_bijection(teleport)
    n = as_quantum_bijection(entanglement_inverse_maxent(q))
    back = entanglement_inverse_maxent(n)
    assert choi_distance(back, teleport) < 1e-9


def test_inverse_needs_verified_bijection(teleport):
    with pytest.raises(InvalidBijectionError):
        entanglement_inverse_maxent(minimal_dilation(teleport))


def test_candidate_for_broken_channel_fails_oracle():
    c = padded_teleportation(weyl_basis(2))
    n = candidate_inverse_maxent(minimal_dilation(c))
    pair = check_entanglement_pair(c, n, bell(2))
    assert pair.right > 0.5


def test_direct_sum_and_composition_of_bijections(teleport, dense):
    qt = as_quantum_bijection(teleport)
    qd = as_quantum_bijection(dense)
    total = direct_sum_qbij(qt, as_quantum_bijection(teleportation_channel(random_ueb(2, seed=4))))
    assert total.aux == 4
    round_trip = compose_qbij(qd, qt)
    assert round_trip.channel.source == round_trip.channel.target == MultimatrixAlgebra((2,))
    pair = check_entanglement_pair(round_trip.channel, entanglement_inverse_maxent(round_trip), bell(4))
    assert max(pair) < 1e-8


def test_pair_check_validates_shapes(teleport, dense):
    with pytest.raises(ShapeMismatchError):
        check_entanglement_pair(teleport, dense, bell(3))
    with pytest.raises(ShapeMismatchError):
        check_entanglement_pair(teleport, teleport, bell(2))


# ----------------------------------------------------------------------
# Construction
# ----------------------------------------------------------------------
def test_construct_qbij_between_mixed_factors():
    q = construct_qbij(MultimatrixAlgebra((1, 2)), MultimatrixAlgebra.classical(5))
    assert q.aux == 2
    assert q.report.verdict


@pytest.mark.parametrize(
    "source,target",
    [((1, 2), (2,)), ((2,), (1, 1, 1)), ((3,), (2, 2))],
)
def test_construct_qbij_dimension_mismatch(source, target):
    with pytest.raises(DimensionMismatchError):
        construct_qbij(MultimatrixAlgebra(source), MultimatrixAlgebra(target))


# ----------------------------------------------------------------------
# Reduction and extension
# ----------------------------------------------------------------------
def test_reduction_preserves_trace_and_vector(rng):
    m = teleportation_channel(random_ueb(3, seed=1))
    w = random_omega(3, 3, rng, rank=2)
    red = reduce_by_omega(m, w)
    assert red.split.rank == 2
    assert red.scale == pytest.approx(1.0)
    assert red.channel.aux == 2
    assert np.vdot(red.state.omega, red.state.omega).real * 2 == pytest.approx(1.0)


def test_extend_left_inverse_checks_iota(teleport):
    n_bar = dense_coding_channel(weyl_basis(2))
    with pytest.raises(ShapeMismatchError):
        extend_left_inverse(n_bar, np.eye(3)[:, :1], 3)
    with pytest.raises(NotAnIsometryError):
        extend_left_inverse(n_bar, 2 * np.eye(3)[:, :2], 3)
    extended = extend_left_inverse(n_bar, np.eye(3)[:, :2], 3)
    assert extended.aux == 3


def test_trace_out_channel_is_reversible_for_rank_deficient_state(rng):
    a = MultimatrixAlgebra((1, 2))
    m = trace_out_channel(a, 3)
    w = random_omega(3, 3, rng, rank=2)
    verdict, cert = is_entanglement_reversible(m, w)
    assert verdict
    n = entanglement_left_inverse(m, w, cert)
    assert check_entanglement_pair(m, n, w).left < 1e-8


# ----------------------------------------------------------------------
# Reversibility
# ----------------------------------------------------------------------
def test_teleportation_reversible_with_bell(teleport, bell2):
    verdict, cert = is_entanglement_reversible(teleport, bell2)
    assert verdict
    assert cert.solve_residual < 1e-10
    assert cert.dims.equal
    assert max(cert.coisometry_residuals) < 1e-8
    margins = dimension_inequalities(cert)
    assert margins == {"source": (0,), "target": (0, 0, 0, 0)}


def test_teleportation_not_reversible_with_generic_state(teleport, rng):
    verdict, cert = is_entanglement_reversible(teleport, random_omega(2, 2, rng))
    assert not verdict
    assert cert.solve_residual > 1e-4


def test_embedding_is_reversible_without_unitary_composites():
    v = haar_unitary(3, np.random.default_rng(5))[:, :2]
    m = embedding_channel(v)
    verdict, cert = is_entanglement_reversible(m, ResourceState.pure([[1.0]]))
    assert verdict
    assert not cert.dims.equal
    assert cert.coisometry_residuals[0] == pytest.approx(1.0)
    assert all(x >= 0 for x in cert.dims.source_margins + cert.dims.target_margins)
    with pytest.raises(DimensionMismatchError):
        entanglement_left_inverse(m, ResourceState.pure([[1.0]]), cert)


def test_left_inverse_needs_verdict(teleport, rng):
    w = random_omega(2, 2, rng)
    _, cert = is_entanglement_reversible(teleport, w)
    with pytest.raises(InvalidCertificateError):
        entanglement_left_inverse(teleport, w, cert)


def test_left_inverse_of_teleportation(teleport, bell2, dense):
    _, cert = is_entanglement_reversible(teleport, bell2)
    n = entanglement_left_inverse(teleport, bell2, cert)
    assert choi_distance(n, dense) < 1e-9


def test_mixed_state_reversibility(teleport):
    z = np.diag([1.0, -1.0]) / 2
    w = ResourceState.mixed([(0.9, np.eye(2) / 2), (0.1, z)])
    verdict, cert = is_entanglement_reversible(teleport, w)
    assert not verdict
    assert cert.solve_residual > 0.01
    assert cert.kind == "mixed"

    pure_as_mixed = ResourceState.mixed([(1.0, np.eye(2) / 2)])
    verdict, cert = is_entanglement_reversible(teleport, pure_as_mixed)
    assert verdict


def test_reversibility_checks_state_shape(teleport):
    with pytest.raises(ShapeMismatchError):
        is_entanglement_reversible(teleport, bell(3))


# ----------------------------------------------------------------------
# Intertwiners and invertibility
# ----------------------------------------------------------------------
def test_intertwiner_identity_and_scalar(teleport):
    q = as_quantum_bijection(teleport)
    assert is_intertwiner(np.eye(2), q, q)
    assert is_intertwiner(0.25 * np.eye(2), q, q)
    report = is_intertwiner(np.diag([1.0, 2.0]), q, q)
    assert not report
    assert report.residual > 1e-3
    with pytest.raises(ShapeMismatchError):
        is_intertwiner(np.eye(3), q, q)


def test_invertible_with_bell(teleport, bell2, dense):
    evidence = is_entanglement_invertible(teleport, bell2)
    assert evidence.verdict
    assert evidence.oracle_agrees
    assert choi_distance(evidence.inverse, dense) < 1e-9


def test_not_invertible_with_generic_state(teleport, rng):
    evidence = is_entanglement_invertible(teleport, random_omega(2, 2, rng))
    assert not evidence.verdict
    assert evidence.oracle_agrees
    assert evidence.inverse is None
    assert evidence.biunitarity.verdict
    assert not evidence.intertwiner.verdict


def test_invertible_with_unitary_omega(teleport, rng):
    evidence = is_entanglement_invertible(teleport, unitary_omega(2, rng))
    assert evidence.verdict
    assert max(evidence.oracle) < 1e-8


def test_mixed_invertibility_combines_components(teleport):
    w = ResourceState.mixed([(0.5, np.eye(2) / 2), (0.5, np.eye(2) / 2)])
    evidence = is_entanglement_invertible(teleport, w)
    assert evidence.kind == "mixed"
    assert len(evidence.components) == 2
    assert evidence.verdict
    assert evidence.oracle_agrees


# ----------------------------------------------------------------------
# Kappa and its composite
# ----------------------------------------------------------------------
def _composite(cert):
    red = cert.reduced
    return kappa_composite(minimal_dilation(red.channel), red.state.omega, cert.kappa)


def test_kappa_of_bell_state_is_uniform_scalar(teleport, bell2):
    verdict, cert = is_entanglement_reversible(teleport, bell2)
    assert verdict
    blocks = list(cert.kappa.blocks.values())
    assert len(blocks) == 4
    assert all(b.shape == (1, 1) for b in blocks)
    moduli = [abs(b[0, 0]) for b in blocks]
    assert moduli[0] > 0
    assert np.allclose(moduli, moduli[0])
    assert cert.kappa_min_singular > 1e-10


def test_kappa_composite_unitary_iff_dimensions_match(teleport, bell2):
    v = haar_unitary(3, np.random.default_rng(5))[:, :2]
    cases = [
        (teleport, bell2, True),
        (embedding_channel(v), ResourceState.pure([[1.0]]), False),
    ]
    for m, w, equal in cases:
        verdict, cert = is_entanglement_reversible(m, w)
        assert verdict
        iso, coiso = unitarity_residuals(_composite(cert))
        assert iso < 1e-9
        assert (coiso < 1e-9) == equal == cert.dims.equal
        assert cert.isometry_residuals[0] == pytest.approx(iso, abs=1e-12)


def test_rescaled_kappa_breaks_composite(teleport, bell2):
    _, cert = is_entanglement_reversible(teleport, bell2)
    doubled = replace(cert, kappa=cert.kappa.map_blocks(lambda key, b: 2 * b))
    iso, _ = unitarity_residuals(_composite(doubled))
    assert iso == pytest.approx(3.0, abs=1e-8)


def test_left_inverse_is_built_from_kappa(teleport, bell2):
    _, cert = is_entanglement_reversible(teleport, bell2)
    broken = replace(cert, kappa=cert.kappa.map_blocks(lambda key, b: 0 * b if key[0][1] == 0 else b))
    n = entanglement_left_inverse(teleport, bell2, broken)
    assert check_entanglement_pair(teleport, n, bell2).left > 0.1
    with pytest.raises(InvalidCertificateError):
        entanglement_left_inverse(teleport, bell2, replace(cert, kappa=None))


def test_kappa_only_for_pure_states(teleport, rng):
    _, cert = is_entanglement_reversible(teleport, random_omega(2, 2, rng))
    assert cert.kappa is not None
    assert cert.kappa_min_singular is not None
    verdict, mixed = is_entanglement_reversible(teleport, ResourceState.mixed([(1.0, np.eye(2) / 2)]))
    assert verdict
    assert mixed.kappa is None
    assert mixed.kappa_min_singular is None


# ----------------------------------------------------------------------
# Anchors and default tolerances
# ----------------------------------------------------------------------
def test_extend_left_inverse_checks_anchor():
    n_bar = dense_coding_channel(weyl_basis(2))
    iota = np.eye(3)[:, :2]
    with pytest.raises(NormalizationError):
        extend_left_inverse(n_bar, iota, 3, anchor=np.diag([1.5, -0.5]))
    with pytest.raises(NormalizationError):
        extend_left_inverse(n_bar, iota, 3, anchor=np.eye(2))
    with pytest.raises(NormalizationError):
        extend_left_inverse(n_bar, iota, 3, anchor=np.array([[0.5, 1.0], [0.0, 0.5]]))
    extended = extend_left_inverse(n_bar, iota, 3, anchor=np.diag([1.0, 0.0]))
    assert is_trace_preserving(extended).verdict


def test_verdicts_default_to_verdict_tolerance(teleport):
    d = minimal_dilation(teleport)
    assert biunitarity(d).tolerance == Config.VERDICT_TOL
    assert check_qbij_equations(d).tolerance == Config.VERDICT_TOL
