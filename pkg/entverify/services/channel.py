"""Completely positive maps between multimatrix algebras.

A ``Channel`` stores one Choi block per factor pair (i, j). Block (i, j)
represents the map B(H (x) X_i) -> B(Y_j); its rows and columns are indexed
by (y, a, x) row-major, i.e. the Choi block is sum_k vec(K_k) vec(K_k)^dag
for Kraus operators K_k: H (x) X_i -> Y_j with the auxiliary factor first.

Channels are matrix-trace preserving by default. The special-trace
convention rescales block (i, j) by h d_i / e_j (see ``to_convention``).
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..config import Config
from ..errors import (
    ConventionError,
    InconsistentDilationError,
    NotCompletelyPositiveError,
    ShapeMismatchError,
)
from .algebra import AlgebraElement, MultimatrixAlgebra, ResourceState, state_to_density
from .diagram import BlockMap, OneMorphism, compose, dagger, identity, residual
from .linalg import eigh_desc, fix_phase, op_norm, psd_power

logger = logging.getLogger(__name__)

CONVENTIONS = ("matrix", "special")

KrausFamily = Dict[Tuple[int, int], List[np.ndarray]]


@dataclass(frozen=True, eq=False)
class Channel:
    source: MultimatrixAlgebra
    target: MultimatrixAlgebra
    aux_dim: int
    choi_blocks: Tuple[Tuple[np.ndarray, ...], ...]
    convention: str = "matrix"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ConventionError(f"unknown trace convention {self.convention!r}")
        if self.aux_dim < 0:
            raise ShapeMismatchError("aux_dim must be nonnegative")
        blocks = tuple(tuple(np.asarray(b, dtype=complex) for b in row) for row in self.choi_blocks)
        object.__setattr__(self, "choi_blocks", blocks)
        if len(blocks) != self.source.size or any(len(row) != self.target.size for row in blocks):
            raise ShapeMismatchError(
                f"expected {self.source.size}x{self.target.size} Choi blocks"
            )
        for i, j in self.block_keys():
            size = self.target.factors[j] * self.input_dim(i)
            if blocks[i][j].shape != (size, size):
                raise ShapeMismatchError(
                    f"Choi block (i={i}, j={j}) must be {size}x{size}, got {blocks[i][j].shape}"
                )

    # -- shape helpers ----------------------------------------------------
    @property
    def aux(self) -> int:
        """Effective auxiliary dimension (1 when there is no auxiliary input)."""
        return max(self.aux_dim, 1)

    def input_dim(self, i: int) -> int:
        return self.aux * self.source.factors[i]

    def block_keys(self) -> Iterator[Tuple[int, int]]:
        for i in range(self.source.size):
            for j in range(self.target.size):
                yield i, j

    def choi(self, i: int, j: int) -> np.ndarray:
        return self.choi_blocks[i][j]

    # -- Kraus view -------------------------------------------------------
    @classmethod
    def from_kraus(cls, source: MultimatrixAlgebra, target: MultimatrixAlgebra, aux_dim: int,
                   kraus: Mapping[Tuple[int, int], Sequence[np.ndarray]],
                   convention: str = "matrix") -> "Channel":
        h = max(aux_dim, 1)
        rows = []
        for i, d in enumerate(source.factors):
            row = []
            for j, e in enumerate(target.factors):
                n = h * d
                block = np.zeros((e * n, e * n), dtype=complex)
                for k in kraus.get((i, j), ()):
                    k = np.asarray(k, dtype=complex)
                    if k.shape != (e, n):
                        raise ShapeMismatchError(
                            f"Kraus operator for (i={i}, j={j}) must be {e}x{n}, got {k.shape}"
                        )
                    v = k.reshape(-1)
                    block += np.outer(v, v.conj())
                row.append(block)
            rows.append(tuple(row))
        return cls(source, target, aux_dim, tuple(rows), convention)

    def kraus_operators(self, rank_tol: Optional[float] = None) -> KrausFamily:
        """Minimal Kraus family: scaled eigenvectors of each Choi block.

        The rank cutoff is relative to the largest eigenvalue of the whole
        channel, so blocks that are zero up to rounding get no operators.
        """
        rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
        spectra = {key: eigh_desc(self.choi(*key)) for key in self.block_keys()}
        scale = max((float(w[0]) for w, _ in spectra.values() if w.size), default=0.0)
        cutoff = rank_tol * scale
        family = {}
        for (i, j), (w, v) in spectra.items():
            e, n = self.target.factors[j], self.input_dim(i)
            family[(i, j)] = [
                np.sqrt(lam) * fix_phase(vec).reshape(e, n)
                for lam, vec in zip(w, v.T)
                if lam > cutoff and lam > 0
            ]
        return family


# ----------------------------------------------------------------------
# Predicates
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class CPReport:
    verdict: bool
    min_eigenvalues: Dict[Tuple[int, int], float]
    worst_block: Tuple[int, int]
    worst_eigenvalue: float

    def __bool__(self):
        return self.verdict


def is_cp(c: Channel, psd_tol: Optional[float] = None) -> CPReport:
    """Choi positivity per block.

    Eigenvalues are reported for the normalized Choi blocks (divided by the
    input dimension h d_i).
    """
    psd_tol = Config.PSD_TOL if psd_tol is None else psd_tol
    mins, maxes = {}, []
    for i, j in c.block_keys():
        w, _ = eigh_desc(c.choi(i, j) / c.input_dim(i))
        mins[(i, j)] = float(w[-1]) if w.size else 0.0
        maxes.append(float(w[0]) if w.size else 0.0)
    scale = max(max(maxes, default=0.0), 0.0)
    worst_block = min(mins, key=mins.get)
    worst = mins[worst_block]
    verdict = worst >= -psd_tol * max(scale, 1e-300)
    if not verdict:
        logger.debug("[Channel] not CP: block %s eigenvalue %.3e", worst_block, worst)
    return CPReport(verdict, mins, worst_block, worst)


@dataclass(frozen=True)
class TPReport:
    verdict: bool
    convention: str
    residual: float
    factor_residuals: Tuple[float, ...]
    isometry_residual: Optional[float]

    def __bool__(self):
        return self.verdict


def _tp_weight(c: Channel, i: int, j: int, convention: str) -> float:
    if convention == "matrix":
        return 1.0
    return c.target.factors[j] / c.input_dim(i)


def partial_trace_output(choi: np.ndarray, e: int, n: int) -> np.ndarray:
    """Trace out the output factor of a Choi block; returns an n x n matrix."""
    return np.einsum("yayb->ab", choi.reshape(e, n, e, n))


def is_trace_preserving(c: Channel, convention: Optional[str] = None,
                        tol: Optional[float] = None) -> TPReport:
    """Trace preservation of the stored Choi blocks under the given convention.

    Special: sum_j e_j Tr_out(C_ij) = h d_i * 1, checked after dividing by
    h d_i. The isometry residual of the weighted minimal dilation is the
    same quantity computed from the dilation side.
    """
    convention = c.convention if convention is None else convention
    if convention not in CONVENTIONS:
        raise ConventionError(f"unknown trace convention {convention!r}")
    tol = Config.TOL if tol is None else tol
    factor_res = []
    for i in range(c.source.size):
        n = c.input_dim(i)
        total = np.zeros((n, n), dtype=complex)
        for j, e in enumerate(c.target.factors):
            total += _tp_weight(c, i, j, convention) * partial_trace_output(c.choi(i, j), e, n)
        factor_res.append(op_norm(total - np.eye(n)))
    res = max(factor_res)

    iso = None
    if is_cp(c):
        d = minimal_dilation(c)
        weighted = d.tau.map_blocks(
            lambda key, block: np.sqrt(_tp_weight(c, key[0][-1], key[1][1], convention)) * block
        )
        iso = residual(compose(dagger(weighted), weighted), identity(weighted.source))
    return TPReport(res < tol, convention, res, tuple(factor_res), iso)


# ----------------------------------------------------------------------
# Dilations
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Dilation:
    """tau_ij: H (x) X_i -> Y_j (x) E_ji, stored as a BlockMap (H, X) -> (Y, E).

    Rows of tau_ij are indexed by (y, k) with k the environment index, so
    tau_ij = sum_k K_k (x) |k>.
    """

    source: MultimatrixAlgebra
    target: MultimatrixAlgebra
    aux_dim: int
    env_dims: Tuple[Tuple[int, ...], ...]
    tau: BlockMap
    minimal: bool
    lam: Optional[BlockMap] = None
    convention: str = "matrix"

    @property
    def aux(self) -> int:
        return max(self.aux_dim, 1)

    @property
    def environment(self) -> OneMorphism:
        return OneMorphism(self.target.size, self.source.size, self.env_dims)

    def tau_block(self, i: int, j: int) -> np.ndarray:
        return self.tau[((0, 0, i), (0, j, i))]

    def kraus(self, i: int, j: int) -> List[np.ndarray]:
        e, r = self.target.factors[j], self.env_dims[j][i]
        block = self.tau_block(i, j).reshape(e, r, self.aux * self.source.factors[i])
        return [block[:, k, :] for k in range(r)]

    def kraus_tensor(self, i: int, j: int) -> np.ndarray:
        """Kraus operators as an array indexed [k, y, a, x]."""
        e, r = self.target.factors[j], self.env_dims[j][i]
        d = self.source.factors[i]
        block = self.tau_block(i, j).reshape(e, r, self.aux, d)
        return block.transpose(1, 0, 2, 3)


def _dilation_box(source, target, aux_dim, env_dims, kraus: KrausFamily) -> BlockMap:
    h = max(aux_dim, 1)
    env = OneMorphism(target.size, source.size, env_dims)
    src = (OneMorphism.hilbert(h), source.splitting())
    tgt = (target.splitting(), env)

    def fill(s, t):
        i, j = s[-1], t[1]
        ops = kraus.get((i, j), [])
        if not ops:
            return None
        return np.stack(ops, axis=1).reshape(len(ops) * target.factors[j], h * source.factors[i])

    return BlockMap.build(src, tgt, fill)


def environment_gram(d: Dilation) -> BlockMap:
    """G_ji[k, l] = <K_l, K_k>, the positive element of End(E) tested for minimality."""
    env = d.environment

    def fill(s, t):
        j, i = s
        ops = d.kraus(i, j)
        if not ops:
            return None
        v = np.array([k.reshape(-1) for k in ops])
        return v @ v.conj().T

    return BlockMap.build((env,), (env,), fill)


def make_dilation(source, target, aux_dim, kraus: KrausFamily, minimal: bool,
                  convention: str = "matrix") -> Dilation:
    env_dims = tuple(
        tuple(len(kraus.get((i, j), [])) for i in range(source.size)) for j in range(target.size)
    )
    tau = _dilation_box(source, target, aux_dim, env_dims, kraus)
    d = Dilation(source, target, aux_dim, env_dims, tau, minimal, None, convention)
    if minimal:
        gram = environment_gram(d)
        lam = gram.map_blocks(lambda key, block: psd_power(block, 0.5))
        d = Dilation(source, target, aux_dim, env_dims, tau, True, lam, convention)
    return d


def minimal_dilation(c: Channel, rank_tol: Optional[float] = None,
                     psd_tol: Optional[float] = None) -> Dilation:
    report = is_cp(c, psd_tol)
    if not report:
        i, j = report.worst_block
        raise NotCompletelyPositiveError(
            f"Choi block (i={i}, j={j}) has eigenvalue {report.worst_eigenvalue:.3e}",
            block=report.worst_block, eigenvalue=report.worst_eigenvalue,
        )
    kraus = c.kraus_operators(rank_tol)
    d = make_dilation(c.source, c.target, c.aux_dim, kraus, True, c.convention)
    logger.debug("[Dilation] minimal dilation with env dims %s", d.env_dims)
    return d


def dilation_to_channel(d: Dilation) -> Channel:
    kraus = {(i, j): d.kraus(i, j) for i in range(d.source.size) for j in range(d.target.size)}
    return Channel.from_kraus(d.source, d.target, d.aux_dim, kraus, d.convention)


def transform_environment(d: Dilation, maps: Mapping[Tuple[int, int], np.ndarray]) -> Dilation:
    """Apply isometries V_ji on the environment: tau_ij -> (1 (x) V_ji) tau_ij.

    ``maps`` is keyed by (j, i); missing keys keep the block unchanged.
    """
    kraus = {}
    square = True
    for i in range(d.source.size):
        for j in range(d.target.size):
            ops = d.kraus(i, j)
            v = maps.get((j, i))
            if v is None:
                kraus[(i, j)] = ops
                continue
            v = np.asarray(v, dtype=complex)
            if v.shape[1] != len(ops):
                raise ShapeMismatchError(
                    f"environment map for (j={j}, i={i}) must have {len(ops)} columns"
                )
            square = square and v.shape[0] == v.shape[1]
            e, n = d.target.factors[j], d.aux * d.source.factors[i]
            stacked = np.array(ops).reshape(len(ops), e, n)
            kraus[(i, j)] = list(np.tensordot(v, stacked, axes=(1, 0)))
    return make_dilation(d.source, d.target, d.aux_dim, kraus, d.minimal and square, d.convention)


def choi_distance(c1: Channel, c2: Channel) -> float:
    """Largest operator-norm difference between corresponding Choi blocks."""
    if (c1.source, c1.target, c1.aux) != (c2.source, c2.target, c2.aux):
        raise ShapeMismatchError("channels have different shapes")
    c2 = to_convention(c2, c1.convention)
    return max(op_norm(c1.choi(i, j) - c2.choi(i, j)) for i, j in c1.block_keys())


def dilations_related(d1: Dilation, d2: Dilation, tol: Optional[float] = None) -> BlockMap:
    """The partial isometry alpha: E1 -> E2 with tau2 = (1 (x) alpha) tau1."""
    tol = Config.TOL if tol is None else tol
    gap = choi_distance(dilation_to_channel(d1), dilation_to_channel(d2))
    if gap > tol:
        raise InconsistentDilationError(f"dilations describe different channels (gap {gap:.3e})")
    worst = 0.0

    def fill(s, t):
        nonlocal worst
        j, i = s
        a = np.array([k.reshape(-1) for k in d1.kraus(i, j)]).T
        b = np.array([k.reshape(-1) for k in d2.kraus(i, j)]).T
        r1, r2 = d1.env_dims[j][i], d2.env_dims[j][i]
        if r1 == 0 or r2 == 0:
            stray = max(op_norm(a) if r1 else 0.0, op_norm(b) if r2 else 0.0)
            worst = max(worst, stray)
            return None
        x, *_ = np.linalg.lstsq(a, b, rcond=None)
        alpha = x.T
        proj = alpha.conj().T @ alpha
        worst = max(
            worst,
            op_norm(a @ alpha.T - b),
            op_norm(b @ alpha.conj() - a),
            op_norm(proj @ proj - proj),
        )
        return alpha

    alpha = BlockMap.build((d1.environment,), (d2.environment,), fill)
    if worst > tol:
        raise InconsistentDilationError(
            f"no partial isometry relates the dilations (residual {worst:.3e})"
        )
    return alpha


# ----------------------------------------------------------------------
# Conventions
# ----------------------------------------------------------------------
def to_convention(c: Channel, convention: str) -> Channel:
    if convention not in CONVENTIONS:
        raise ConventionError(f"unknown trace convention {convention!r}")
    if convention == c.convention:
        return c
    rows = []
    for i in range(c.source.size):
        row = []
        for j, e in enumerate(c.target.factors):
            ratio = c.input_dim(i) / e
            factor = ratio if convention == "special" else 1 / ratio
            row.append(factor * c.choi(i, j))
        rows.append(tuple(row))
    return Channel(c.source, c.target, c.aux_dim, tuple(rows), convention)


# ----------------------------------------------------------------------
# Plumbing: composition, tensor, application
# ----------------------------------------------------------------------
def _combined_aux(*channels: Channel) -> int:
    if all(c.aux_dim == 0 for c in channels):
        return 0
    return int(np.prod([c.aux for c in channels]))


def _same_convention(*channels: Channel) -> str:
    conventions = {c.convention for c in channels}
    if len(conventions) != 1:
        raise ConventionError(f"channels use different trace conventions: {sorted(conventions)}")
    return conventions.pop()


def compose_channels(g: Channel, f: Channel) -> Channel:
    """g after f; the auxiliary input of the result is H_g (x) H_f."""
    if f.target != g.source:
        raise ShapeMismatchError(
            f"cannot compose: {f.target.factors} does not match {g.source.factors}"
        )
    convention = _same_convention(f, g)
    fk, gk = f.kraus_operators(), g.kraus_operators()
    kraus = {}
    lift = np.eye(g.aux, dtype=complex)
    for i in range(f.source.size):
        for k in range(g.target.size):
            ops = []
            for j in range(f.target.size):
                for kf in fk[(i, j)]:
                    lifted = np.kron(lift, kf)
                    ops.extend(kg @ lifted for kg in gk[(j, k)])
            kraus[(i, k)] = ops
    return Channel.from_kraus(f.source, g.target, _combined_aux(f, g), kraus, convention)


def tensor_channels(f: Channel, g: Channel) -> Channel:
    """f (x) g; factor pairs are ordered row-major, auxiliary input H_f (x) H_g."""
    convention = _same_convention(f, g)
    fk, gk = f.kraus_operators(), g.kraus_operators()
    hf, hg = f.aux, g.aux
    kraus = {}
    for i, d in enumerate(f.source.factors):
        for i2, d2 in enumerate(g.source.factors):
            for j, e in enumerate(f.target.factors):
                for j2, e2 in enumerate(g.target.factors):
                    ops = []
                    for kf in fk[(i, j)]:
                        for kg in gk[(i2, j2)]:
                            k = np.kron(kf, kg).reshape(e * e2, hf, d, hg, d2)
                            ops.append(k.transpose(0, 1, 3, 2, 4).reshape(e * e2, hf * hg * d * d2))
                    kraus[(i * g.source.size + i2, j * g.target.size + j2)] = ops
    return Channel.from_kraus(
        f.source.tensor(g.source), f.target.tensor(g.target), _combined_aux(f, g), kraus, convention
    )


def apply(c: Channel, x: AlgebraElement, aux: Optional[np.ndarray] = None) -> AlgebraElement:
    if x.algebra != c.source:
        raise ShapeMismatchError(
            f"element of {x.algebra.factors} cannot be fed to a channel on {c.source.factors}"
        )
    if c.aux_dim >= 1:
        if aux is None:
            raise ShapeMismatchError("this channel needs an auxiliary input")
        aux = np.asarray(aux, dtype=complex)
        if aux.shape != (c.aux, c.aux):
            raise ShapeMismatchError(f"auxiliary input must be {c.aux}x{c.aux}")
    elif aux is not None:
        raise ShapeMismatchError("this channel has no auxiliary input")
    else:
        aux = np.ones((1, 1), dtype=complex)
    out = []
    for j, e in enumerate(c.target.factors):
        total = np.zeros((e, e), dtype=complex)
        for i in range(c.source.size):
            n = c.input_dim(i)
            z = np.kron(aux, x.blocks[i])
            total += np.einsum("yuvw,uw->yv", c.choi(i, j).reshape(e, n, e, n), z)
        out.append(total)
    return AlgebraElement(c.target, tuple(out))


def as_superoperator(c: Channel) -> np.ndarray:
    """Full matrix acting on row-major vectorized elements of A (x) B(H)."""
    rows = sum(e * e for e in c.target.factors)
    cols = sum(c.input_dim(i) ** 2 for i in range(c.source.size))
    out = np.zeros((rows, cols), dtype=complex)
    col = 0
    for i in range(c.source.size):
        n = c.input_dim(i)
        row = 0
        for j, e in enumerate(c.target.factors):
            block = c.choi(i, j).reshape(e, n, e, n).transpose(0, 2, 1, 3).reshape(e * e, n * n)
            out[row:row + e * e, col:col + n * n] = block
            row += e * e
        col += n * n
    return out


# ----------------------------------------------------------------------
# Reference channels
# ----------------------------------------------------------------------
def identity_channel(algebra: MultimatrixAlgebra) -> Channel:
    kraus = {(i, i): [np.eye(d, dtype=complex)] for i, d in enumerate(algebra.factors)}
    return Channel.from_kraus(algebra, algebra, 0, kraus)


def unitary_channel(u) -> Channel:
    u = np.asarray(u, dtype=complex)
    algebra = MultimatrixAlgebra.matrix(u.shape[0])
    return Channel.from_kraus(algebra, algebra, 0, {(0, 0): [u]})


def state_channel(w: ResourceState) -> Channel:
    """The state as a channel C -> B(H2 (x) H1)."""
    rho = state_to_density(w)
    return Channel(MultimatrixAlgebra((1,)), rho.algebra, 0, ((rho.blocks[0],),))


def random_channel(source: MultimatrixAlgebra, target: MultimatrixAlgebra, aux_dim: int = 0,
                   seed: Optional[int] = None, convention: str = "matrix",
                   kraus_rank: Optional[int] = None) -> Channel:
    """Random CPTP map in the requested convention, from Gaussian Kraus operators."""
    rng = np.random.default_rng(Config.SEED if seed is None else seed)
    h = max(aux_dim, 1)
    total_out = sum(target.factors)
    kraus = {}
    for i, d in enumerate(source.factors):
        n = h * d
        needed = -(-n // total_out)
        rank = max(needed, kraus_rank if kraus_rank is not None else int(rng.integers(1, 3)))
        ops = {}
        gram = np.zeros((n, n), dtype=complex)
        for j, e in enumerate(target.factors):
            ops[j] = [rng.standard_normal((e, n)) + 1j * rng.standard_normal((e, n)) for _ in range(rank)]
            weight = 1.0 if convention == "matrix" else e / n
            gram += weight * sum(k.conj().T @ k for k in ops[j])
        fix = psd_power(gram, -0.5)
        for j in ops:
            kraus[(i, j)] = [k @ fix for k in ops[j]]
    return Channel.from_kraus(source, target, aux_dim, kraus, convention)


def aux_direct_sum(f: Channel, g: Channel) -> Channel:
    """The channel on A (x) B(H_f (+) H_g) acting as f on H_f and g on H_g."""
    if (f.source, f.target) != (g.source, g.target):
        raise ShapeMismatchError("direct sums need channels between the same algebras")
    convention = _same_convention(f, g)
    h = f.aux + g.aux
    pf = np.eye(h, dtype=complex)[: f.aux]
    pg = np.eye(h, dtype=complex)[f.aux:]
    fk, gk = f.kraus_operators(), g.kraus_operators()
    kraus = {}
    for i, d in enumerate(f.source.factors):
        ef = np.kron(pf, np.eye(d))
        eg = np.kron(pg, np.eye(d))
        for j in range(f.target.size):
            kraus[(i, j)] = [k @ ef for k in fk[(i, j)]] + [k @ eg for k in gk[(i, j)]]
    return Channel.from_kraus(f.source, f.target, h, kraus, convention)


def factor_direct_sum(channels: Sequence[Channel]) -> Channel:
    """Block-diagonal sum over factors: (+)_c A_c -> (+)_c B_c."""
    if not channels:
        raise ShapeMismatchError("nothing to sum")
    convention = _same_convention(*channels)
    if len({c.aux_dim for c in channels}) != 1:
        raise ShapeMismatchError("direct summands must share the auxiliary dimension")
    aux_dim = channels[0].aux_dim
    h = channels[0].aux
    source = MultimatrixAlgebra(tuple(d for c in channels for d in c.source.factors))
    target = MultimatrixAlgebra(tuple(e for c in channels for e in c.target.factors))
    rows = []
    for ci, c in enumerate(channels):
        for i in range(c.source.size):
            row = []
            for cj, other in enumerate(channels):
                for j, e in enumerate(other.target.factors):
                    if ci == cj:
                        row.append(c.choi(i, j))
                    else:
                        size = e * h * c.source.factors[i]
                        row.append(np.zeros((size, size), dtype=complex))
            rows.append(tuple(row))
    return Channel(source, target, aux_dim, tuple(rows), convention)

