"""Multimatrix algebras, their elements, and bipartite resource states."""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg as sla

from ..config import Config
from ..errors import NormalizationError, ShapeMismatchError, ZeroStateError
from .diagram import OneMorphism
from .linalg import eigh_desc, fix_phase, haar_unitary, numerical_rank

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MultimatrixAlgebra:
    """The algebra B(C^d_1) (+) ... (+) B(C^d_m)."""

    factors: Tuple[int, ...]

    def __post_init__(self):
        factors = tuple(int(d) for d in self.factors)
        object.__setattr__(self, "factors", factors)
        if not factors:
            raise ShapeMismatchError("an algebra needs at least one factor")
        if any(d < 1 for d in factors):
            raise ShapeMismatchError(f"factor dimensions must be positive, got {factors}")

    @classmethod
    def matrix(cls, d: int) -> "MultimatrixAlgebra":
        return cls((d,))

    @classmethod
    def classical(cls, n: int) -> "MultimatrixAlgebra":
        return cls((1,) * n)

    @property
    def size(self) -> int:
        return len(self.factors)

    @property
    def dim(self) -> int:
        return sum(d * d for d in self.factors)

    def splitting(self) -> OneMorphism:
        return OneMorphism.splitting(self.factors)

    def tensor(self, other: "MultimatrixAlgebra") -> "MultimatrixAlgebra":
        """Factors of A (x) B, ordered row-major over (i, j)."""
        return MultimatrixAlgebra(tuple(d * e for d in self.factors for e in other.factors))

    def identity(self) -> "AlgebraElement":
        return AlgebraElement(self, tuple(np.eye(d, dtype=complex) for d in self.factors))

    def zeros(self) -> "AlgebraElement":
        return AlgebraElement(self, tuple(np.zeros((d, d), dtype=complex) for d in self.factors))

    def random_element(self, rng) -> "AlgebraElement":
        return AlgebraElement(self, tuple(
            rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for d in self.factors
        ))

    def random_state(self, rng) -> "AlgebraElement":
        """A random density: positive blocks with total matrix trace 1."""
        blocks = []
        for d in self.factors:
            g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            blocks.append(g @ g.conj().T)
        total = sum(np.trace(b).real for b in blocks)
        return AlgebraElement(self, tuple(b / total for b in blocks))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    algebra: MultimatrixAlgebra
    blocks: Tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=complex) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if len(blocks) != self.algebra.size:
            raise ShapeMismatchError(
                f"expected {self.algebra.size} blocks, got {len(blocks)}"
            )
        for i, (b, d) in enumerate(zip(blocks, self.algebra.factors)):
            if b.shape != (d, d):
                raise ShapeMismatchError(f"block {i} must be {d}x{d}, got {b.shape}")

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._require_same(other)
        return AlgebraElement(self.algebra, tuple(a @ b for a, b in zip(self.blocks, other.blocks)))

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._require_same(other)
        return AlgebraElement(self.algebra, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._require_same(other)
        return AlgebraElement(self.algebra, tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def scale(self, c: complex) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(c * b for b in self.blocks))

    def adjoint(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(b.conj().T for b in self.blocks))

    def vectorize(self) -> np.ndarray:
        """Concatenated row-major vectorization of the blocks."""
        if not self.blocks:
            return np.zeros(0, dtype=complex)
        return np.concatenate([b.reshape(-1) for b in self.blocks])

    @classmethod
    def from_vector(cls, algebra: MultimatrixAlgebra, vec) -> "AlgebraElement":
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != (algebra.dim,):
            raise ShapeMismatchError(f"expected a vector of length {algebra.dim}")
        blocks, offset = [], 0
        for d in algebra.factors:
            blocks.append(vec[offset:offset + d * d].reshape(d, d))
            offset += d * d
        return cls(algebra, tuple(blocks))

    def distance(self, other: "AlgebraElement") -> float:
        self._require_same(other)
        return max(float(np.linalg.norm(a - b, 2)) for a, b in zip(self.blocks, other.blocks))

    def _require_same(self, other: "AlgebraElement") -> None:
        if self.algebra != other.algebra:
            raise ShapeMismatchError(
                f"elements of different algebras: {self.algebra.factors} vs {other.algebra.factors}"
            )


def matrix_trace(x: AlgebraElement) -> complex:
    return complex(sum(np.trace(b) for b in x.blocks))


def special_trace(x: AlgebraElement) -> complex:
    """The weighted trace sum_i d_i Tr(x_i)."""
    return complex(sum(d * np.trace(b) for d, b in zip(x.algebra.factors, x.blocks)))


# ----------------------------------------------------------------------
# Resource states
# ----------------------------------------------------------------------
def _scale(h1: int, h2: int) -> float:
    """(h1 h2)^(1/4): ratio between a unit vector |w> and its omega."""
    return float(h1 * h2) ** 0.25


@dataclass(frozen=True, eq=False)
class ResourceState:
    """A bipartite state on B(H1) (x) B(H2).

    Each pure component is stored as omega: H1 -> H2 (an h2 x h1 matrix)
    with Tr(omega^dag omega) = (h1 h2)^(-1/2). The associated unit vector in
    H1 (x) H2 has coefficients (h1 h2)^(1/4) * omega[b, a].
    """

    h1: int
    h2: int
    kind: str
    components: Tuple[Tuple[float, np.ndarray], ...]

    def __post_init__(self):
        if self.h1 < 1 or self.h2 < 1:
            raise ShapeMismatchError("state dimensions must be positive")
        if self.kind not in ("pure", "mixed"):
            raise ShapeMismatchError(f"unknown state kind {self.kind!r}")
        if self.kind == "pure" and len(self.components) != 1:
            raise ShapeMismatchError("a pure state has exactly one component")
        comps = tuple((float(p), np.asarray(w, dtype=complex)) for p, w in self.components)
        object.__setattr__(self, "components", comps)
        for p, w in comps:
            if w.shape != (self.h2, self.h1):
                raise ShapeMismatchError(f"omega must be {self.h2}x{self.h1}, got {w.shape}")
            if p <= 0:
                raise NormalizationError("component weights must be positive")

    # -- construction ---------------------------------------------------
    @classmethod
    def pure(cls, omega, renormalize: bool = False, tol: Optional[float] = None) -> "ResourceState":
        omega = np.asarray(omega, dtype=complex)
        if omega.ndim != 2:
            raise ShapeMismatchError("omega must be a matrix")
        h2, h1 = omega.shape
        omega = _normalized_omega(omega, h1, h2, renormalize, tol)
        return cls(h1, h2, "pure", ((1.0, omega),))

    @classmethod
    def mixed(cls, components: Sequence[Tuple[float, np.ndarray]], renormalize: bool = False,
              tol: Optional[float] = None) -> "ResourceState":
        tol = Config.TOL if tol is None else tol
        if not components:
            raise NormalizationError("a mixed state needs at least one component")
        h2, h1 = np.asarray(components[0][1]).shape
        weights = np.array([float(p) for p, _ in components])
        if np.any(weights <= 0):
            raise NormalizationError("component weights must be positive")
        if abs(weights.sum() - 1) > tol:
            if not renormalize:
                raise NormalizationError(f"weights sum to {weights.sum():.12g}, expected 1")
            weights = weights / weights.sum()
        comps = tuple(
            (float(p), _normalized_omega(np.asarray(w, dtype=complex), h1, h2, renormalize, tol))
            for p, (_, w) in zip(weights, components)
        )
        return cls(h1, h2, "mixed", comps)

    # -- views ------------------------------------------------------------
    @property
    def omega(self) -> np.ndarray:
        if self.kind != "pure":
            raise ShapeMismatchError("omega is only defined for pure states")
        return self.components[0][1]

    @property
    def weights(self) -> Tuple[float, ...]:
        return tuple(p for p, _ in self.components)

    def coupling(self, index: int = 0) -> np.ndarray:
        """Coefficients w[a, b] of the unit vector of a component in H1 (x) H2."""
        return _scale(self.h1, self.h2) * self.components[index][1].T

    def vector(self, index: int = 0) -> np.ndarray:
        """Unit vector of a component in H2 (x) H1 (row-major vec of omega)."""
        return _scale(self.h1, self.h2) * self.components[index][1].reshape(-1)

    def pure_components(self) -> Tuple["ResourceState", ...]:
        return tuple(ResourceState(self.h1, self.h2, "pure", ((1.0, w),)) for _, w in self.components)

    def as_mixed(self) -> "ResourceState":
        return ResourceState(self.h1, self.h2, "mixed", self.components)


def _normalized_omega(omega, h1, h2, renormalize, tol):
    tol = Config.TOL if tol is None else tol
    norm2 = float(np.vdot(omega, omega).real) * np.sqrt(h1 * h2)
    if norm2 == 0:
        raise ZeroStateError("omega is zero")
    if abs(norm2 - 1) > tol:
        if not renormalize:
            raise NormalizationError(
                f"Tr(omega^dag omega) * sqrt(h1 h2) = {norm2:.12g}, expected 1"
            )
        logger.warning("[State] renormalizing omega (norm factor %.6g)", norm2)
        omega = omega / np.sqrt(norm2)
    return omega


def canonical_max_entangled(d: int) -> ResourceState:
    if d < 1:
        raise ShapeMismatchError("dimension must be positive")
    return ResourceState.pure(np.eye(d, dtype=complex) / d)


def state_to_density(w: ResourceState) -> AlgebraElement:
    """Density matrix on H2 (x) H1 with matrix trace 1."""
    n = w.h1 * w.h2
    rho = np.zeros((n, n), dtype=complex)
    for idx, (p, _) in enumerate(w.components):
        v = w.vector(idx)
        rho += p * np.outer(v, v.conj())
    return AlgebraElement(MultimatrixAlgebra.matrix(n), (rho,))


def density_to_state(rho: AlgebraElement, h1: int, h2: int, rank_tol: Optional[float] = None,
                     tol: Optional[float] = None, psd_tol: Optional[float] = None) -> ResourceState:
    """Spectral decomposition of a density on H2 (x) H1 into pure components."""
    tol = Config.TOL if tol is None else tol
    psd_tol = Config.PSD_TOL if psd_tol is None else psd_tol
    if rho.algebra.factors != (h1 * h2,):
        raise ShapeMismatchError(f"density must live on B(C^{h1 * h2})")
    m = rho.blocks[0]
    w, v = eigh_desc(m)
    if w.size and w[-1] < -psd_tol * max(1.0, w[0]):
        raise NormalizationError(f"density is not positive: eigenvalue {w[-1]:.3e}")
    trace = float(np.trace(m).real)
    if abs(trace - 1) > tol:
        raise NormalizationError(f"density has trace {trace:.12g}, expected 1")
    rank = numerical_rank(np.clip(w, 0, None), rank_tol)
    if rank == 0:
        raise ZeroStateError("density is zero")
    kept = w[:rank]
    weights = kept / kept.sum()
    comps = []
    for p, vec in zip(weights, v[:, :rank].T):
        omega = fix_phase(vec).reshape(h2, h1) / _scale(h1, h2)
        comps.append((float(p), omega))
    kind = "pure" if rank == 1 else "mixed"
    return ResourceState(h1, h2, kind, tuple(comps))


class OmegaSplit(NamedTuple):
    iota: np.ndarray
    omega_bar: np.ndarray
    q: np.ndarray
    rank: int


def omega_svd_split(w: ResourceState, rank_tol: Optional[float] = None) -> OmegaSplit:
    """omega = iota @ omega_bar @ q with iota an isometry and q a coisometry."""
    omega = w.omega
    if not np.any(omega):
        raise ZeroStateError("omega is zero")
    u, s, vh = sla.svd(omega, full_matrices=False)
    r = numerical_rank(s, rank_tol)
    if r == 0:
        raise ZeroStateError("omega is numerically zero")
    return OmegaSplit(u[:, :r], np.diag(s[:r]).astype(complex), vh[:r, :], r)


def random_decomposition(w: ResourceState, seed: int = 0, extra: int = 1,
                         rank_tol: Optional[float] = None) -> ResourceState:
    """Another convex decomposition of the same density.

    The weighted vectors sqrt(p_c)|w_c> are mixed by a random isometry, so
    the sum of their projectors is unchanged.
    """
    rng = np.random.default_rng(seed)
    vectors = np.array([np.sqrt(p) * w.vector(c) for c, (p, _) in enumerate(w.components)])
    k = len(vectors)
    q = haar_unitary(k + extra, rng)[:, :k]
    mixed = q @ vectors
    weights = np.einsum("ij,ij->i", mixed.conj(), mixed).real
    keep = weights > (Config.RANK_TOL if rank_tol is None else rank_tol) * weights.max()
    comps = []
    for vec, p in zip(mixed[keep], weights[keep]):
        omega = (vec / np.sqrt(p)).reshape(w.h2, w.h1) / _scale(w.h1, w.h2)
        comps.append((float(p), omega))
    total = sum(p for p, _ in comps)
    return ResourceState(w.h1, w.h2, "mixed", tuple((p / total, om) for p, om in comps))
