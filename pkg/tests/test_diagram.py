import numpy as np
import pytest
from hypothesis import given, strategies as st

from entverify.errors import DimensionError, RegionMismatchError, ShapeMismatchError
from entverify.services.diagram import (
    BlockMap,
    OneMorphism,
    cap,
    compose,
    conjugate,
    cup,
    dagger,
    identity,
    left_dimension,
    residual,
    tensor,
    transpose,
    unitarity_residuals,
)


def random_box(source, target, seed):
    rng = np.random.default_rng(seed)
    empty = BlockMap.build(source, target, lambda s, t: None)
    return empty.map_blocks(
        lambda key, b: rng.standard_normal(b.shape) + 1j * rng.standard_normal(b.shape)
    )


@st.composite
def wires(draw, left=None, right=None, low=0):
    left = draw(st.integers(1, 3)) if left is None else left
    right = draw(st.integers(1, 3)) if right is None else right
    dims = [[draw(st.integers(low, 3)) for _ in range(right)] for _ in range(left)]
    return OneMorphism(left, right, dims)


@st.composite
def parallel_wires(draw):
    v = draw(wires())
    w = draw(wires(v.left_index, v.right_index))
    return v, w


seeds = st.integers(0, 2**32 - 1)


@given(wires())
def test_snake_identities(v):
    first = compose(
        tensor(cap(v), identity((v,))),
        tensor(identity((v,)), cup(v)),
    )
    assert residual(first, identity((v,))) < 1e-12

    vd = v.dual()
    second = compose(
        tensor(identity((vd,)), cap(v)),
        tensor(cup(v), identity((vd,))),
    )
    assert residual(second, identity((vd,))) < 1e-12


@st.composite
def two_into_one(draw):
    """Wires V1: [a] -> [b], V2: [b] -> [c] and W: [a] -> [c]."""
    a, b, c = (draw(st.integers(1, 3)) for _ in range(3))
    return draw(wires(a, b)), draw(wires(b, c)), draw(wires(a, c))


@given(two_into_one(), seeds)
def test_involutions(chain, seed):
    v1, v2, w = chain
    f = random_box((v1, v2), (w,), seed)

    assert residual(dagger(dagger(f)), f) == 0
    assert residual(transpose(transpose(f)), f) < 1e-14
    assert residual(conjugate(conjugate(f)), f) < 1e-14
    assert residual(dagger(transpose(f)), conjugate(f)) < 1e-14


@given(parallel_wires(), seeds)
def test_slide_through_cup(vw, seed):
    v, w = vw
    f = random_box((v,), (w,), seed)
    lhs = compose(tensor(identity((v.dual(),)), f), cup(v))
    rhs = compose(tensor(transpose(f), identity((w,))), cup(w))
    assert residual(lhs, rhs) < 1e-12


@given(parallel_wires(), seeds)
def test_slide_through_cap(vw, seed):
    v, w = vw
    f = random_box((v,), (w,), seed)
    lhs = compose(cap(w), tensor(f, identity((w.dual(),))))
    rhs = compose(cap(v), tensor(identity((v,)), transpose(f)))
    assert residual(lhs, rhs) < 1e-12


def test_unshaded_boxes_match_matrix_algebra(rng):
    a = rng.standard_normal((3, 2))
    b = rng.standard_normal((4, 3))
    c = rng.standard_normal((2, 2))
    composed = compose(BlockMap.from_matrix(b), BlockMap.from_matrix(a))
    assert np.allclose(composed[((0, 0), (0, 0))], b @ a)
    juxtaposed = tensor(BlockMap.from_matrix(a), BlockMap.from_matrix(c))
    assert np.allclose(juxtaposed[((0, 0, 0), (0, 0, 0))], np.kron(a, c))


def test_zero_dimensional_blocks_compose():
    v = OneMorphism(1, 2, [[2, 0]])
    f = identity((v,))
    g = compose(f, f)
    assert g[((0, 1), (0, 1))].shape == (0, 0)
    assert residual(g, f) == 0


def test_compose_reports_mismatched_wire():
    v = OneMorphism.hilbert(2)
    w = OneMorphism.hilbert(3)
    f = identity((v, v))
    g = identity((v, w))
    with pytest.raises(ShapeMismatchError) as exc:
        compose(g, f)
    assert exc.value.wire == 1


def test_tensor_needs_matching_regions():
    f = identity((OneMorphism(1, 2, [[1, 1]]),))
    g = identity((OneMorphism(3, 1, [[1], [1], [1]]),))
    with pytest.raises(RegionMismatchError):
        tensor(f, g)


def test_block_shapes_are_validated():
    v = OneMorphism.hilbert(2)
    with pytest.raises(ShapeMismatchError):
        BlockMap((v,), (v,), {((0, 0), (0, 0)): np.eye(3)}, 1, 1)


def test_unitary_box_has_zero_residuals(rng):
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert max(unitarity_residuals(BlockMap.from_matrix(q))) < 1e-12
    iso, coiso = unitarity_residuals(BlockMap.from_matrix(q[:, :2]))
    assert iso < 1e-12
    assert coiso == pytest.approx(1.0)


def test_left_dimension_of_splitting():
    scalars = left_dimension(OneMorphism.splitting((2, 3)))
    assert scalars.values == (2, 3)
    assert np.allclose((scalars * scalars.inverse()).values, (1, 1))
    with pytest.raises(DimensionError):
        left_dimension(OneMorphism(2, 2, [[1, 0], [1, 0]]))


def test_dual_transposes_dimensions():
    v = OneMorphism(2, 3, [[1, 2, 3], [4, 5, 6]])
    assert v.dual().dims == ((1, 4), (2, 5), (3, 6))
    assert v.dual().dual() == v


@st.composite
def composable_boxes(draw):
    """Three parallel wires U, V, W: [a] -> [b] and boxes f: U -> V, g: V -> W."""
    u = draw(wires())
    v = draw(wires(u.left_index, u.right_index))
    w = draw(wires(u.left_index, u.right_index))
    seed = draw(seeds)
    return random_box((u,), (v,), seed), random_box((v,), (w,), seed + 1)


@given(composable_boxes())
def test_dagger_and_transpose_reverse_composition(boxes):
    f, g = boxes
    gf = compose(g, f)
    assert residual(dagger(gf), compose(dagger(f), dagger(g))) < 1e-12
    assert residual(transpose(gf), compose(transpose(f), transpose(g))) < 1e-12
    assert residual(conjugate(gf), compose(conjugate(g), conjugate(f))) < 1e-12


@st.composite
def interchange_boxes(draw):
    """h: V1 -> V2, f: V2 -> V3 on [a] -> [b]; k: W1 -> W2, g: W2 -> W3 on [b] -> [c]."""
    a, b, c = (draw(st.integers(1, 3)) for _ in range(3))
    v = [draw(wires(a, b)) for _ in range(3)]
    w = [draw(wires(b, c)) for _ in range(3)]
    seed = draw(seeds)
    h, f = random_box((v[0],), (v[1],), seed), random_box((v[1],), (v[2],), seed + 1)
    k, g = random_box((w[0],), (w[1],), seed + 2), random_box((w[1],), (w[2],), seed + 3)
    return f, g, h, k


@given(interchange_boxes())
def test_interchange_law(boxes):
    f, g, h, k = boxes
    lhs = compose(tensor(f, g), tensor(h, k))
    rhs = tensor(compose(f, h), compose(g, k))
    assert residual(lhs, rhs) < 1e-12


@given(two_into_one(), seeds)
def test_gram_of_box_has_positive_diagonal_blocks(chain, seed):
    v1, v2, w = chain
    f = random_box((v1, v2), (w,), seed)
    gram = compose(dagger(f), f)
    for (s, t), block in gram.blocks.items():
        if s != t or block.size == 0:
            continue
        assert np.linalg.eigvalsh((block + block.conj().T) / 2).min() > -1e-12 * max(1.0, np.abs(block).max())


@given(wires(low=1))
def test_left_dimension_is_cup_norm(v):
    loop = compose(dagger(cup(v)), cup(v))
    assert residual(loop, left_dimension(v).as_blockmap()) < 1e-12
    n = left_dimension(v).sqrt()
    assert np.allclose((n * n).values, left_dimension(v).values)
