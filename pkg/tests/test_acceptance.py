"""End-to-end properties over corpora of channels and states."""
import numpy as np
import pytest
import scipy.linalg as sla

from entverify.errors import DimensionMismatchError
from entverify.services.algebra import (
    MultimatrixAlgebra,
    ResourceState,
    canonical_max_entangled,
    random_decomposition,
    state_to_density,
)
from entverify.services.channel import (
    Channel,
    as_superoperator,
    choi_distance,
    dilation_to_channel,
    dilations_related,
    is_trace_preserving,
    minimal_dilation,
    random_channel,
    transform_environment,
)
from entverify.services.linalg import haar_unitary, op_norm
from entverify.services.schemes import (
    biunitarity,
    candidate_inverse_maxent,
    check_entanglement_pair,
    check_qbij_equations,
    construct_qbij,
    entanglement_left_inverse,
    is_entanglement_invertible,
    is_entanglement_reversible,
)
from entverify.services.ueb import (
    classify_tight_teleportation,
    dense_coding_channel,
    match_up_to_phase,
    random_ueb,
    teleportation_channel,
    weyl_basis,
)

from builders import (
    bell,
    broken_corpus,
    embedding_channel,
    noisy_teleportation,
    qbij_corpus,
    random_omega,
    trace_out_channel,
    unitary_omega,
)

ORACLE_TOL = 1e-8

CORPUS = [(name, c, True) for name, c in qbij_corpus()] + [(name, c, False) for name, c in broken_corpus()]


def _with_aux(c: Channel) -> Channel:
    return c if c.aux_dim else Channel(c.source, c.target, 1, c.choi_blocks, c.convention)


def _random_factors(rng, total):
    twos = int(rng.integers(0, total // 4 + 1))
    factors = [2] * twos + [1] * (total - 4 * twos)
    rng.shuffle(factors)
    return tuple(factors)


# ----------------------------------------------------------------------
# Teleportation and dense coding
# ----------------------------------------------------------------------
@pytest.mark.parametrize("d", [2, 3, 4])
def test_weyl_teleportation_round_trip(d):
    u = weyl_basis(d)
    evidence = is_entanglement_invertible(teleportation_channel(u), bell(d))
    assert evidence.verdict
    assert evidence.oracle_agrees
    assert choi_distance(evidence.inverse, dense_coding_channel(u)) < 1e-9

    result = classify_tight_teleportation(teleportation_channel(u), bell(d))
    assert result.accepted
    _, _, residual = match_up_to_phase(result.ueb, u)
    assert residual < 1e-8


def _fed(c: Channel, aux: np.ndarray) -> np.ndarray:
    """Superoperator of x -> c(aux (x) x) on the source algebra alone."""
    lifts = []
    for d in c.source.factors:
        units = np.eye(d * d).reshape(d * d, d, d)
        lifts.append(np.column_stack([np.kron(aux, unit).reshape(-1) for unit in units]))
    return as_superoperator(c) @ sla.block_diag(*lifts)


def _unit(n, r, s):
    out = np.zeros((n, n))
    out[r, s] = 1
    return out


def _superoperator_residuals(m, n, w):
    h1, h2 = w.h1, w.h2
    rho = state_to_density(w).blocks[0].reshape(h2, h1, h2, h1)
    left = sum(
        _fed(n, _unit(h2, b, b2)) @ _fed(m, rho[b, :, b2, :]) for b in range(h2) for b2 in range(h2)
    )
    right = sum(
        _fed(m, _unit(h1, a, a2)) @ _fed(n, rho[:, a, :, a2]) for a in range(h1) for a2 in range(h1)
    )
    return op_norm(left - np.eye(m.source.dim)), op_norm(right - np.eye(m.target.dim))


def _pair_instances():
    u = weyl_basis(2)
    yield teleportation_channel(u), dense_coding_channel(u), bell(2)
    yield noisy_teleportation(u, 0.3), dense_coding_channel(u), bell(2)
    for seed in range(6):
        rng = np.random.default_rng(seed)
        h1, h2 = (int(h) for h in rng.integers(1, 3, size=2))
        a = MultimatrixAlgebra(_random_factors(rng, 4))
        b = MultimatrixAlgebra((int(rng.integers(1, 3)), 1))
        w = random_omega(h2, h1, rng)
        if seed % 2:
            other = random_omega(h2, h1, rng)
            w = ResourceState.mixed([(0.4, w.components[0][1]), (0.6, other.components[0][1])])
        yield random_channel(a, b, aux_dim=h1, seed=seed), random_channel(b, a, aux_dim=h2, seed=seed + 50), w


@pytest.mark.parametrize("m,n,w", list(_pair_instances()))
def test_pair_residuals_match_superoperators(m, n, w):
    pair = check_entanglement_pair(m, n, w)
    left, right = _superoperator_residuals(m, n, w)
    assert pair.left == pytest.approx(left, abs=1e-9)
    assert pair.right == pytest.approx(right, abs=1e-9)


# ----------------------------------------------------------------------
# Biunitarity against the superoperator oracle
# ----------------------------------------------------------------------
def test_corpus_size():
    assert len(CORPUS) >= 50
    assert sum(1 for *_, expected in CORPUS if not expected) == 20


@pytest.mark.parametrize("name,channel,expected", CORPUS, ids=[name for name, *_ in CORPUS])
def test_biunitarity_matches_oracle(name, channel, expected):
    c = _with_aux(channel)
    d = minimal_dilation(c)
    verdict = biunitarity(d, tol=ORACLE_TOL).verdict
    assert verdict == expected

    candidate = candidate_inverse_maxent(d)
    pair = check_entanglement_pair(c, candidate, canonical_max_entangled(c.aux))
    assert (max(pair) < ORACLE_TOL) == verdict

    assert check_qbij_equations(d, tol=ORACLE_TOL).verdict == verdict


# ----------------------------------------------------------------------
# Dilations of random channels
# ----------------------------------------------------------------------
@pytest.mark.parametrize("seed", range(50))
def test_random_dilations(seed):
    rng = np.random.default_rng(100 + seed)
    source = MultimatrixAlgebra(tuple(int(x) for x in rng.integers(1, 4, size=int(rng.integers(1, 4)))))
    target = MultimatrixAlgebra(tuple(int(x) for x in rng.integers(1, 4, size=int(rng.integers(1, 4)))))
    convention = "special" if seed % 2 else "matrix"
    c = random_channel(source, target, aux_dim=int(rng.integers(0, 3)), seed=seed, convention=convention)

    d = minimal_dilation(c)
    assert choi_distance(dilation_to_channel(d), c) < 1e-10

    maps = {}
    for i in range(source.size):
        for j in range(target.size):
            r = d.env_dims[j][i]
            maps[(j, i)] = haar_unitary(r + 1, rng)[:, :r]
    padded = transform_environment(d, maps)
    alpha = dilations_related(d, padded)
    for (j, i), v in maps.items():
        assert op_norm(alpha[((j, i), (j, i))] - v) < 1e-9

    for checked in ("matrix", "special"):
        report = is_trace_preserving(c, convention=checked, tol=1e-9)
        assert report.verdict == (report.isometry_residual < 1e-9)
    assert is_trace_preserving(c, tol=1e-9).verdict


# ----------------------------------------------------------------------
# Dimension law
# ----------------------------------------------------------------------
def _certified_instances():
    rng = np.random.default_rng(7)
    yield teleportation_channel(weyl_basis(2)), bell(2)
    yield dense_coding_channel(random_ueb(2, seed=1)), bell(2)
    yield teleportation_channel(weyl_basis(3)), unitary_omega(3, rng)
    yield embedding_channel(haar_unitary(3, rng)[:, :2]), ResourceState.pure([[1.0]])
    yield embedding_channel(haar_unitary(4, rng)[:, :1]), ResourceState.pure([[1.0]])
    yield trace_out_channel(MultimatrixAlgebra((1, 2)), 3), random_omega(3, 3, rng, rank=2)


@pytest.mark.parametrize("m,w", list(_certified_instances()))
def test_reversible_instances_obey_dimension_law(m, w):
    verdict, cert = is_entanglement_reversible(m, w)
    assert verdict
    assert cert.dims.source_dim <= cert.dims.target_dim
    assert all(x >= 0 for x in cert.dims.source_margins + cert.dims.target_margins)
    assert (max(cert.coisometry_residuals) < ORACLE_TOL) == cert.dims.equal


@pytest.mark.parametrize("seed", range(10))
def test_construct_qbij_for_matched_dimensions(seed):
    rng = np.random.default_rng(seed)
    total = int(rng.integers(1, 9))
    source = MultimatrixAlgebra(_random_factors(rng, total))
    target = MultimatrixAlgebra(_random_factors(rng, total))
    q = construct_qbij(source, target)
    assert q.report.verdict
    assert q.channel.source == source
    assert q.channel.target == target


@pytest.mark.parametrize("seed", range(10))
def test_construct_qbij_for_mismatched_dimensions(seed):
    rng = np.random.default_rng(50 + seed)
    total = int(rng.integers(1, 9))
    other = total + int(rng.integers(1, 4))
    with pytest.raises(DimensionMismatchError):
        construct_qbij(
            MultimatrixAlgebra(_random_factors(rng, total)), MultimatrixAlgebra(_random_factors(rng, other))
        )


# ----------------------------------------------------------------------
# Invertibility against the oracle
# ----------------------------------------------------------------------
@pytest.mark.parametrize("seed", range(30))
def test_invertibility_matches_oracle(seed):
    rng = np.random.default_rng(200 + seed)
    m = teleportation_channel(random_ueb(2, seed=seed))
    maximal = seed % 3 == 0
    w = unitary_omega(2, rng) if maximal else random_omega(2, 2, rng)
    evidence = is_entanglement_invertible(m, w)
    assert evidence.verdict == maximal
    assert evidence.oracle_agrees
    assert (max(evidence.oracle) < ORACLE_TOL) == maximal


# ----------------------------------------------------------------------
# Reduction by the support of omega
# ----------------------------------------------------------------------
@pytest.mark.parametrize("seed", range(20))
def test_reduction_keeps_verdict(seed):
    rng = np.random.default_rng(300 + seed)
    algebra = MultimatrixAlgebra((1, 2))
    w = random_omega(3, 3, rng, rank=int(rng.integers(1, 3)))
    channels = [trace_out_channel(algebra, 3), random_channel(algebra, algebra, aux_dim=3, seed=seed)]
    for m, expected in zip(channels, (True, False)):
        verdict, cert = is_entanglement_reversible(m, w)
        reduced_verdict, _ = is_entanglement_reversible(cert.reduced.channel, cert.reduced.state)
        assert verdict == reduced_verdict == expected
        if verdict:
            n = entanglement_left_inverse(m, w, cert)
            assert n.aux_dim == 3
            assert check_entanglement_pair(m, n, w).left < ORACLE_TOL


# ----------------------------------------------------------------------
# Mixed resource states
# ----------------------------------------------------------------------
def test_mixed_states_and_their_decompositions():
    m = teleportation_channel(weyl_basis(2))
    assert is_entanglement_reversible(m, bell(2))[0]

    z = np.diag([1.0, -1.0]) / 2
    noisy = ResourceState.mixed([(0.9, np.eye(2) / 2), (0.1, z)])
    verdict, cert = is_entanglement_reversible(m, noisy)
    assert not verdict
    assert cert.solve_residual == pytest.approx(0.075)

    pure = ResourceState.mixed([(1.0, np.eye(2) / 2)])
    for seed in range(5):
        assert not is_entanglement_reversible(m, random_decomposition(noisy, seed=seed, extra=2))[0]
        assert is_entanglement_reversible(m, random_decomposition(pure, seed=seed, extra=2))[0]
