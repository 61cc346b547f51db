"""Shaded string-diagram engine.

Wires are indexed families of Hilbert spaces (``OneMorphism``), boxes are
indexed families of linear maps (``BlockMap``). A box is stored as one dense
block per assignment of indices to the regions adjoining it, including
zero-dimensional blocks, so composition never special-cases empty spaces.

Region assignments are written as full sequences: the source sequence
``(r_0, ..., r_p)`` lists the regions crossed along the bottom edge from left
to right, the target sequence ``(r_0, ..., r_q)`` those along the top edge.
Both share their endpoints. Empty chains use the single-region sequence
``(r,)``.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from ..errors import DimensionError, RegionMismatchError, ShapeMismatchError
from .linalg import op_norm

logger = logging.getLogger(__name__)

Regions = Tuple[int, ...]
Key = Tuple[Regions, Regions]


@dataclass(frozen=True)
class OneMorphism:
    """A wire between the index sets ``[left_index]`` and ``[right_index]``.

    ``dims[i][j]`` is the dimension of the Hilbert space V_ij.
    """

    left_index: int
    right_index: int
    dims: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        dims = tuple(tuple(int(v) for v in row) for row in self.dims)
        object.__setattr__(self, "dims", dims)
        if self.left_index < 1 or self.right_index < 1:
            raise ShapeMismatchError("index sets must be nonempty")
        if len(dims) != self.left_index or any(len(row) != self.right_index for row in dims):
            raise ShapeMismatchError(
                f"dims must be {self.left_index}x{self.right_index}, got "
                f"{len(dims)} rows"
            )
        if any(v < 0 for row in dims for v in row):
            raise ShapeMismatchError("dimensions must be nonnegative")

    @classmethod
    def identity(cls, m: int) -> "OneMorphism":
        return cls(m, m, tuple(tuple(int(i == j) for j in range(m)) for i in range(m)))

    @classmethod
    def hilbert(cls, d: int) -> "OneMorphism":
        """Unshaded wire: a single Hilbert space of dimension d."""
        return cls(1, 1, ((d,),))

    @classmethod
    def splitting(cls, factors: Sequence[int]) -> "OneMorphism":
        """The wire X: 1 -> [m] splitting a multimatrix algebra with these factors."""
        factors = tuple(int(d) for d in factors)
        return cls(1, len(factors), (factors,))

    def dual(self) -> "OneMorphism":
        return OneMorphism(
            self.right_index,
            self.left_index,
            tuple(tuple(self.dims[i][j] for i in range(self.left_index)) for j in range(self.right_index)),
        )

    def dim(self, i: int, j: int) -> int:
        return self.dims[i][j]


Chain = Tuple[OneMorphism, ...]


# ----------------------------------------------------------------------
# Chain bookkeeping
# ----------------------------------------------------------------------
def _check_chain(chain: Chain, what: str) -> None:
    for pos in range(1, len(chain)):
        if chain[pos - 1].right_index != chain[pos].left_index:
            raise ShapeMismatchError(
                f"{what} chain is not composable at wire {pos}", wire=pos
            )


def _outer(chain: Chain) -> Optional[Tuple[int, int]]:
    if not chain:
        return None
    return chain[0].left_index, chain[-1].right_index


def _sequences(chain: Chain, left: int) -> Iterator[Regions]:
    """All region sequences along a chain, row-major, left region first."""
    if not chain:
        for r in range(left):
            yield (r,)
        return
    ranges = [range(chain[0].left_index)] + [range(w.right_index) for w in chain]
    yield from itertools.product(*ranges)


def _completions(chain: Chain, start: int, end: int) -> Iterator[Regions]:
    """Region sequences along ``chain`` with fixed endpoints."""
    if not chain:
        if start == end:
            yield (start,)
        return
    inner = [range(w.right_index) for w in chain[:-1]]
    for mid in itertools.product(*inner):
        yield (start,) + tuple(mid) + (end,)


def _wire_dims(chain: Chain, seq: Regions) -> Tuple[int, ...]:
    return tuple(w.dims[seq[k]][seq[k + 1]] for k, w in enumerate(chain))


def _chain_dim(chain: Chain, seq: Regions) -> int:
    return int(np.prod(_wire_dims(chain, seq), dtype=int)) if chain else 1


def _keys(source: Chain, target: Chain, left: int) -> Iterator[Key]:
    for s in _sequences(source, left):
        for t in _completions(target, s[0], s[-1]):
            yield s, t


# ----------------------------------------------------------------------
# Boxes
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class BlockMap:
    """A family of linear maps between two wire chains.

    ``left``/``right`` are the sizes of the outer region index sets; they are
    needed when both chains are empty.
    """

    source: Chain
    target: Chain
    blocks: Dict[Key, np.ndarray]
    left: int
    right: int

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "target", tuple(self.target))
        _check_chain(self.source, "source")
        _check_chain(self.target, "target")
        for chain in (self.source, self.target):
            outer = _outer(chain)
            if outer is not None and outer != (self.left, self.right):
                raise ShapeMismatchError(
                    f"chain spans index sets {outer}, box spans {(self.left, self.right)}"
                )
        if not self.source and not self.target and self.left != self.right:
            raise ShapeMismatchError("an endomorphism of an empty chain needs left == right")
        for key in self.keys():
            block = self.blocks.get(key)
            shape = self.block_shape(key)
            if block is None or block.shape != shape:
                raise ShapeMismatchError(
                    f"block {key} must have shape {shape}, got "
                    f"{None if block is None else block.shape}"
                )

    # -- construction ---------------------------------------------------
    @classmethod
    def build(
        cls,
        source: Sequence[OneMorphism],
        target: Sequence[OneMorphism],
        fill: Callable[[Regions, Regions], Optional[np.ndarray]],
        left: Optional[int] = None,
        right: Optional[int] = None,
    ) -> "BlockMap":
        """Create a box from a per-key filler; ``None`` means a zero block."""
        source, target = tuple(source), tuple(target)
        outer = _outer(source) or _outer(target)
        if outer is None:
            if left is None:
                raise ShapeMismatchError("an empty-chain box needs an explicit region size")
            outer = (left, left if right is None else right)
        blocks = {}
        for s, t in _keys(source, target, outer[0]):
            shape = (_chain_dim(target, t), _chain_dim(source, s))
            block = fill(s, t)
            if block is None:
                block = np.zeros(shape, dtype=complex)
            block = np.asarray(block, dtype=complex).reshape(shape)
            blocks[(s, t)] = block
        return cls(source, target, blocks, outer[0], outer[1])

    @classmethod
    def from_matrix(cls, a) -> "BlockMap":
        """Unshaded box for an ordinary matrix."""
        a = np.asarray(a, dtype=complex)
        src, tgt = OneMorphism.hilbert(a.shape[1]), OneMorphism.hilbert(a.shape[0])
        return cls((src,), (tgt,), {((0, 0), (0, 0)): a}, 1, 1)

    def keys(self) -> Iterator[Key]:
        return _keys(self.source, self.target, self.left)

    def block_shape(self, key: Key) -> Tuple[int, int]:
        s, t = key
        return _chain_dim(self.target, t), _chain_dim(self.source, s)

    def __getitem__(self, key: Key) -> np.ndarray:
        return self.blocks[key]

    def map_blocks(self, fn: Callable[[Key, np.ndarray], np.ndarray]) -> "BlockMap":
        return BlockMap(
            self.source, self.target,
            {key: np.asarray(fn(key, block), dtype=complex) for key, block in self.blocks.items()},
            self.left, self.right,
        )

    def __sub__(self, other: "BlockMap") -> "BlockMap":
        _require_parallel(self, other)
        return self.map_blocks(lambda key, block: block - other.blocks[key])

    def __add__(self, other: "BlockMap") -> "BlockMap":
        _require_parallel(self, other)
        return self.map_blocks(lambda key, block: block + other.blocks[key])


def _require_parallel(f: BlockMap, g: BlockMap) -> None:
    if f.source != g.source or f.target != g.target or (f.left, f.right) != (g.left, g.right):
        raise ShapeMismatchError("boxes are not parallel")


def _first_mismatch(a: Chain, b: Chain) -> int:
    for pos, (wa, wb) in enumerate(zip(a, b)):
        if wa != wb:
            return pos
    return min(len(a), len(b))


def identity(chain: Sequence[OneMorphism], left: Optional[int] = None) -> BlockMap:
    chain = tuple(chain)

    def fill(s, t):
        if s != t:
            return None
        return np.eye(_chain_dim(chain, s), dtype=complex)

    return BlockMap.build(chain, chain, fill, left=left)


def residual(f: BlockMap, g: BlockMap) -> float:
    """Largest operator-norm difference over all blocks."""
    diff = f - g
    return max((op_norm(b) for b in diff.blocks.values()), default=0.0)


# ----------------------------------------------------------------------
# Composition and tensor product
# ----------------------------------------------------------------------
def compose(g: BlockMap, f: BlockMap) -> BlockMap:
    """g after f, summing over the closed regions between the two boxes."""
    if f.target != g.source or (f.left, f.right) != (g.left, g.right):
        pos = _first_mismatch(f.target, g.source)
        raise ShapeMismatchError(
            f"cannot compose: target of f and source of g differ at wire {pos}",
            wire=pos,
        )

    def fill(s, u):
        total = None
        for t in _completions(f.target, s[0], s[-1]):
            term = g.blocks[(t, u)] @ f.blocks[(s, t)]
            total = term if total is None else total + term
        return total

    return BlockMap.build(f.source, g.target, fill, left=f.left, right=f.right)


def tensor(f: BlockMap, g: BlockMap) -> BlockMap:
    """Horizontal juxtaposition: f on the left, g on the right."""
    if f.right != g.left:
        raise RegionMismatchError(
            f"right region of f has {f.right} indices, left region of g has {g.left}"
        )
    pf, qf = len(f.source), len(f.target)

    def fill(s, t):
        if s[pf] != t[qf]:
            return None
        fb = f.blocks[(s[: pf + 1], t[: qf + 1])]
        gb = g.blocks[(s[pf:], t[qf:])]
        return np.kron(fb, gb)

    return BlockMap.build(
        f.source + g.source, f.target + g.target, fill, left=f.left, right=g.right
    )


# ----------------------------------------------------------------------
# Involutions
# ----------------------------------------------------------------------
def dagger(f: BlockMap) -> BlockMap:
    blocks = {(t, s): b.conj().T for (s, t), b in f.blocks.items()}
    return BlockMap(f.target, f.source, blocks, f.left, f.right)


def _reversed_duals(chain: Chain) -> Chain:
    return tuple(w.dual() for w in reversed(chain))


def transpose(f: BlockMap) -> BlockMap:
    """The pi-rotated box: chains reversed and dualized, blocks transposed."""
    p, q = len(f.source), len(f.target)
    blocks = {}
    for (s, t), b in f.blocks.items():
        tdims, sdims = _wire_dims(f.target, t), _wire_dims(f.source, s)
        tensor_ = b.reshape(tdims + sdims)
        axes = list(range(q + p - 1, q - 1, -1)) + list(range(q - 1, -1, -1))
        rows = int(np.prod(sdims, dtype=int))
        cols = int(np.prod(tdims, dtype=int))
        blocks[(t[::-1], s[::-1])] = tensor_.transpose(axes).reshape(rows, cols)
    return BlockMap(_reversed_duals(f.target), _reversed_duals(f.source), blocks, f.right, f.left)


def conjugate(f: BlockMap) -> BlockMap:
    """Entrywise conjugate with wire order reversed: dagger of the transpose."""
    p, q = len(f.source), len(f.target)
    blocks = {}
    for (s, t), b in f.blocks.items():
        tdims, sdims = _wire_dims(f.target, t), _wire_dims(f.source, s)
        tensor_ = b.conj().reshape(tdims + sdims)
        axes = list(range(q - 1, -1, -1)) + list(range(q + p - 1, q - 1, -1))
        rows = int(np.prod(tdims, dtype=int))
        cols = int(np.prod(sdims, dtype=int))
        blocks[(s[::-1], t[::-1])] = tensor_.transpose(axes).reshape(rows, cols)
    return BlockMap(_reversed_duals(f.source), _reversed_duals(f.target), blocks, f.right, f.left)


# ----------------------------------------------------------------------
# Duality
# ----------------------------------------------------------------------
def _eta(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex).reshape(d * d, 1)


def cup(v: OneMorphism) -> BlockMap:
    """eta_V: id_[n] -> V* (x) V for V: [m] -> [n]."""
    chain = (v.dual(), v)

    def fill(s, t):
        i, j = t[0], t[1]
        return _eta(v.dims[j][i])

    return BlockMap.build((), chain, fill, left=v.right_index)


def cap(v: OneMorphism) -> BlockMap:
    """epsilon_V: V (x) V* -> id_[m] for V: [m] -> [n]."""
    chain = (v, v.dual())

    def fill(s, t):
        i, j = s[0], s[1]
        return _eta(v.dims[i][j]).T

    return BlockMap.build(chain, (), fill, left=v.left_index)


# ----------------------------------------------------------------------
# Scalars on regions
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class EndoScalarFamily:
    """An endomorphism of id_[m]: one scalar per region index."""

    index: int
    values: Tuple[complex, ...]

    def __post_init__(self):
        values = tuple(complex(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) != self.index:
            raise ShapeMismatchError(f"expected {self.index} values, got {len(values)}")

    def __mul__(self, other: "EndoScalarFamily") -> "EndoScalarFamily":
        if other.index != self.index:
            raise RegionMismatchError("scalar families live on different index sets")
        return EndoScalarFamily(self.index, tuple(a * b for a, b in zip(self.values, other.values)))

    def sqrt(self) -> "EndoScalarFamily":
        return EndoScalarFamily(self.index, tuple(np.sqrt(v) for v in self.values))

    def inverse(self) -> "EndoScalarFamily":
        if any(v == 0 for v in self.values):
            raise DimensionError("scalar family is not invertible")
        return EndoScalarFamily(self.index, tuple(1 / v for v in self.values))

    def as_blockmap(self) -> BlockMap:
        return BlockMap.build((), (), lambda s, t: np.array([[self.values[s[0]]]]), left=self.index)


def left_dimension(v: OneMorphism) -> EndoScalarFamily:
    """d_V on the right region: component j is the sum of dims over column j."""
    values = tuple(sum(v.dims[i][j] for i in range(v.left_index)) for j in range(v.right_index))
    if any(val == 0 for val in values):
        raise DimensionError(f"left dimension has a zero component: {values}")
    return EndoScalarFamily(v.right_index, values)


def unitarity_residuals(f: BlockMap) -> Tuple[float, float]:
    """Isometry and coisometry residuals of a box."""
    iso = residual(compose(dagger(f), f), identity(f.source, left=f.left))
    coiso = residual(compose(f, dagger(f)), identity(f.target, left=f.left))
    logger.debug("[Diagram] unitarity residuals iso=%.3e coiso=%.3e", iso, coiso)
    return iso, coiso
