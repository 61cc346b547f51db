"""Entanglement-assisted reversibility and invertibility of channels.

Channels here are M: A (x) B(H1) -> B and N: B (x) B(H2) -> A, used with a
resource state W on H1 (x) H2. N is an entanglement-left inverse of M when
N o (M (x) 1) o (1 (x) W) = id_A, and an inverse when in addition
M o (N (x) 1) o (1 (x) W) = id_B.

Every procedure works in the matrix-trace convention; channels declared in
the special convention are converted on entry.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import linalg as sla

from ..config import Config
from ..errors import (
    DimensionMismatchError,
    InvalidBijectionError,
    InvalidCertificateError,
    NonMinimalDilationError,
    NormalizationError,
    NotAnIsometryError,
    ShapeMismatchError,
)
from .algebra import (
    MultimatrixAlgebra,
    OmegaSplit,
    ResourceState,
    omega_svd_split,
)
from .channel import (
    Channel,
    Dilation,
    aux_direct_sum,
    compose_channels,
    factor_direct_sum,
    minimal_dilation,
    to_convention,
)
from .diagram import (
    BlockMap,
    EndoScalarFamily,
    cap,
    compose,
    cup,
    identity,
    left_dimension,
    tensor,
    unitarity_residuals,
)
from .linalg import (
    coisometry_residual,
    eigh_desc,
    isometry_residual,
    op_norm,
    orthonormal_complement,
    polar_isometry,
    psd_power,
)

logger = logging.getLogger(__name__)


def _matrix(c: Channel) -> Channel:
    return to_convention(c, "matrix")


# ----------------------------------------------------------------------
# Biunitarity and quantum bijections
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class BiunitarityReport:
    isometry_residuals: Tuple[float, float]
    coisometry_residuals: Tuple[float, float]
    tolerance: float
    verdict: bool

    def __bool__(self):
        return self.verdict


def _require_minimal(d: Dilation) -> None:
    if not d.minimal:
        raise NonMinimalDilationError("this check needs a minimal dilation")


def _rotated(d: Dilation) -> BlockMap:
    """tau bent into X (x) E* -> H* (x) Y with a cup on H and a cap on E."""
    h_wire = d.tau.source[0]
    x_wire = d.tau.source[1]
    y_wire = d.tau.target[0]
    env = d.environment
    h_dual, env_dual = h_wire.dual(), env.dual()

    bend_in = tensor(tensor(cup(h_wire), identity((x_wire,))), identity((env_dual,)))
    middle = tensor(tensor(identity((h_dual,)), d.tau), identity((env_dual,)))
    bend_out = tensor(tensor(identity((h_dual,)), identity((y_wire,))), cap(env))
    return compose(bend_out, compose(middle, bend_in))


def _with_discs(f: BlockMap, inner: EndoScalarFamily, outer: EndoScalarFamily) -> BlockMap:
    """Insert ``inner`` on the region between X and E*, and ``outer`` on the right region."""
    x_wire, env_dual = f.source
    discs = tensor(tensor(identity((x_wire,)), inner.as_blockmap()), identity((env_dual,)))
    return tensor(compose(f, discs), outer.as_blockmap())


def _half_dimensions(d: Dilation) -> Tuple[EndoScalarFamily, EndoScalarFamily]:
    """n_X and n_Y, the square roots of the left dimensions of the splittings."""
    return left_dimension(d.tau.source[1]).sqrt(), left_dimension(d.tau.target[0]).sqrt()


def biunitary_composites(d: Dilation) -> Tuple[BlockMap, BlockMap]:
    """The dilation itself and its rotated form X (x) E* -> H* (x) Y.

    The rotated form carries the discs n_X and n_Y^-1.
    """
    n_x, n_y = _half_dimensions(d)
    return d.tau, _with_discs(_rotated(d), n_x, n_y.inverse())


def biunitarity(d: Dilation, h: Optional[int] = None, tol: Optional[float] = None) -> BiunitarityReport:
    _require_minimal(d)
    if h is not None and max(h, 1) != d.aux:
        raise ShapeMismatchError(f"declared auxiliary dimension {h} does not match {d.aux}")
    tol = Config.VERDICT_TOL if tol is None else tol
    first, second = biunitary_composites(d)
    iso1, coiso1 = unitarity_residuals(first)
    iso2, coiso2 = unitarity_residuals(second)
    verdict = max(iso1, iso2, coiso1, coiso2) < tol
    logger.debug("[Schemes] biunitarity residuals %s", (iso1, iso2, coiso1, coiso2))
    return BiunitarityReport((iso1, iso2), (coiso1, coiso2), tol, verdict)


@dataclass(frozen=True)
class QbijEquationReport:
    multiplication: float
    comultiplication: float
    unit: float
    channel: float
    tolerance: float
    verdict: bool

    def __bool__(self):
        return self.verdict


def check_qbij_equations(d: Dilation, h: Optional[int] = None,
                         tol: Optional[float] = None) -> QbijEquationReport:
    """Multiplication, comultiplication and unit equations of a quantum bijection.

    Evaluated directly on Kraus tensors and Choi blocks rather than through
    the diagram engine, so they cross-check ``biunitarity``.
    """
    _require_minimal(d)
    if h is not None and max(h, 1) != d.aux:
        raise ShapeMismatchError(f"declared auxiliary dimension {h} does not match {d.aux}")
    tol = Config.VERDICT_TOL if tol is None else tol
    m, n = d.source.size, d.target.size
    dims, edims = d.source.factors, d.target.factors

    mult = 0.0
    for j in range(n):
        for i in range(m):
            for i2 in range(m):
                t1, t2 = d.kraus_tensor(i, j), d.kraus_tensor(i2, j)
                g = np.einsum("kyax,lyaz->lzkx", t1, t2.conj())
                g = g.reshape(t2.shape[0] * dims[i2], t1.shape[0] * dims[i])
                g = g * np.sqrt(dims[i] * dims[i2]) / edims[j]
                expected = np.eye(g.shape[0]) if i == i2 else np.zeros(g.shape)
                mult = max(mult, op_norm(g - expected))

    comult = 0.0
    for i in range(m):
        for j in range(n):
            for j2 in range(n):
                g = d.tau_block(i, j) @ d.tau_block(i, j2).conj().T
                expected = np.eye(g.shape[0]) if j == j2 else np.zeros(g.shape)
                comult = max(comult, op_norm(g - expected))

    unit = 0.0
    for j, e in enumerate(edims):
        total = np.zeros((e * d.aux, e * d.aux), dtype=complex)
        for i, di in enumerate(dims):
            t = d.kraus_tensor(i, j)
            total += (di / e) * np.einsum("kyax,kzbx->yazb", t, t.conj()).reshape(e * d.aux, e * d.aux)
        unit = max(unit, op_norm(total - np.eye(e * d.aux)))

    chan = 0.0
    for i, di in enumerate(dims):
        nin = d.aux * di
        total = np.zeros((nin, nin), dtype=complex)
        for j in range(n):
            block = d.tau_block(i, j)
            total += block.conj().T @ block
        chan = max(chan, op_norm(total - np.eye(nin)))

    verdict = max(mult, comult, unit, chan) < tol
    return QbijEquationReport(mult, comult, unit, chan, tol, verdict)


@dataclass(frozen=True, eq=False)
class QuantumBijection:
    channel: Channel
    dilation: Dilation
    report: BiunitarityReport

    @property
    def aux(self) -> int:
        return self.dilation.aux


def as_quantum_bijection(c: Channel, tol: Optional[float] = None) -> QuantumBijection:
    c = _matrix(c)
    if c.aux_dim == 0:
        c = Channel(c.source, c.target, 1, c.choi_blocks, c.convention)
    if c.source.dim != c.target.dim:
        raise DimensionMismatchError(
            f"quantum bijections need dim(A) = dim(B), got {c.source.dim} and {c.target.dim}"
        )
    d = minimal_dilation(c)
    report = biunitarity(d, tol=tol)
    if not report:
        raise InvalidBijectionError(
            f"channel is not biunitary (residuals {report.isometry_residuals}, "
            f"{report.coisometry_residuals})"
        )
    return QuantumBijection(c, d, report)


def candidate_inverse_maxent(d: Dilation) -> Channel:
    """The channel B (x) B(H) -> A with Kraus operators sqrt(d_i / e_j) conj(K)^T-bent.

    L[x; b, y] = sqrt(d_i / e_j) * conj(K[y; b, x]); its environment is E*.
    """
    kraus = {}
    for i, di in enumerate(d.source.factors):
        for j, e in enumerate(d.target.factors):
            t = d.kraus_tensor(i, j)
            ops = np.sqrt(di / e) * t.conj().transpose(0, 3, 2, 1)
            kraus[(j, i)] = list(ops.reshape(t.shape[0], di, d.aux * e))
    return Channel.from_kraus(d.target, d.source, max(d.aux_dim, 1), kraus)


def entanglement_inverse_maxent(q: QuantumBijection) -> Channel:
    if not isinstance(q, QuantumBijection) or not q.report.verdict:
        raise InvalidBijectionError("a verified quantum bijection is required")
    return candidate_inverse_maxent(q.dilation)


def direct_sum_qbij(q1: QuantumBijection, q2: QuantumBijection) -> QuantumBijection:
    return as_quantum_bijection(aux_direct_sum(q1.channel, q2.channel))


def compose_qbij(q2: QuantumBijection, q1: QuantumBijection) -> QuantumBijection:
    return as_quantum_bijection(compose_channels(q2.channel, q1.channel))


def construct_qbij(a: MultimatrixAlgebra, b: MultimatrixAlgebra) -> QuantumBijection:
    """A quantum bijection A -> B through the classical algebra [dim A].

    Each factor B(C^d) of A is measured with the Weyl teleportation scheme,
    repeated lcm/d times so all factors share one auxiliary space; the
    outcomes are then decoded into B with dense coding the same way.
    """
    from .ueb import dense_coding_channel, teleportation_channel, weyl_basis

    if a.dim != b.dim:
        raise DimensionMismatchError(f"dim(A) = {a.dim} but dim(B) = {b.dim}")
    mu = math.lcm(*a.factors)
    nu = math.lcm(*b.factors)

    def stacked(channel: Channel, copies: int) -> Channel:
        out = channel
        for _ in range(copies - 1):
            out = aux_direct_sum(out, channel)
        return out

    encoder = factor_direct_sum(
        [stacked(teleportation_channel(weyl_basis(d)), mu // d) for d in a.factors]
    )
    decoder = factor_direct_sum(
        [stacked(dense_coding_channel(weyl_basis(e)), nu // e) for e in b.factors]
    )
    logger.info("[Schemes] constructing quantum bijection %s -> %s (aux %d)", a.factors, b.factors, mu * nu)
    return as_quantum_bijection(compose_channels(decoder, encoder))


# ----------------------------------------------------------------------
# The brute-force oracle
# ----------------------------------------------------------------------
class PairResiduals(NamedTuple):
    left: float
    right: float


def _identity_super(algebra: MultimatrixAlgebra) -> np.ndarray:
    return np.eye(algebra.dim, dtype=complex)


def _offsets(algebra: MultimatrixAlgebra) -> List[int]:
    out, acc = [], 0
    for d in algebra.factors:
        out.append(acc)
        acc += d * d
    return out


def check_entanglement_pair(m: Channel, n: Channel, w: ResourceState) -> PairResiduals:
    """Residuals of both inverse equations, evaluated as full superoperators."""
    m, n = _matrix(m), _matrix(n)
    if m.source != n.target or m.target != n.source:
        raise ShapeMismatchError("M and N must map between the same algebras in opposite directions")
    if m.aux != w.h1 or n.aux != w.h2:
        raise ShapeMismatchError(
            f"auxiliary dimensions ({m.aux}, {n.aux}) do not match the state ({w.h1}, {w.h2})"
        )
    a, b = m.source, m.target
    mk, nk = m.kraus_operators(), n.kraus_operators()
    couplings = [(p, w.coupling(c)) for c, (p, _) in enumerate(w.components)]

    left = np.zeros((a.dim, a.dim), dtype=complex)
    oa = _offsets(a)
    for i, di in enumerate(a.factors):
        for i2, di2 in enumerate(a.factors):
            for j, e in enumerate(b.factors):
                for km in mk[(i, j)]:
                    kt = km.reshape(e, w.h1, di)
                    for kn in nk[(j, i2)]:
                        lt = kn.reshape(di2, w.h2, e)
                        for p, cw in couplings:
                            t = np.sqrt(p) * np.einsum("pby,yax,ab->px", lt, kt, cw)
                            left[oa[i2]:oa[i2] + di2 * di2, oa[i]:oa[i] + di * di] += np.kron(t, t.conj())

    right = np.zeros((b.dim, b.dim), dtype=complex)
    ob = _offsets(b)
    for j, e in enumerate(b.factors):
        for j2, e2 in enumerate(b.factors):
            for i, di in enumerate(a.factors):
                for kn in nk[(j, i)]:
                    lt = kn.reshape(di, w.h2, e)
                    for km in mk[(i, j2)]:
                        kt = km.reshape(e2, w.h1, di)
                        for p, cw in couplings:
                            t = np.sqrt(p) * np.einsum("qax,xby,ab->qy", kt, lt, cw)
                            right[ob[j2]:ob[j2] + e2 * e2, ob[j]:ob[j] + e * e] += np.kron(t, t.conj())

    return PairResiduals(
        op_norm(left - _identity_super(a)),
        op_norm(right - _identity_super(b)),
    )


# ----------------------------------------------------------------------
# Reduction by the support of omega
# ----------------------------------------------------------------------
class ReducedProblem(NamedTuple):
    channel: Channel
    state: ResourceState
    split: OmegaSplit
    scale: float


def reduce_by_omega(m: Channel, w: ResourceState, rank_tol: Optional[float] = None) -> ReducedProblem:
    """Restrict M to the support of omega: omega = iota omega_bar q.

    The reduced channel has Kraus operators K (q^T (x) 1) on C^r (x) X_i,
    rescaled so it is trace preserving; the scale is reported (it is 1 up
    to rounding in the matrix convention).
    """
    m = _matrix(m)
    if w.kind != "pure":
        raise ShapeMismatchError("reduction needs a pure state")
    if m.aux != w.h1:
        raise ShapeMismatchError(f"channel auxiliary dimension {m.aux} does not match h1 = {w.h1}")
    split = omega_svd_split(w, rank_tol)
    r = split.rank
    kraus = {}
    for (i, j), ops in m.kraus_operators().items():
        lift = np.kron(split.q.T, np.eye(m.source.factors[i]))
        kraus[(i, j)] = [k @ lift for k in ops]
    total = sum(float(np.vdot(k, k).real) for ops in kraus.values() for k in ops)
    expected = r * sum(m.source.factors)
    scale = float(np.sqrt(expected / total)) if total > 0 else 1.0
    kraus = {key: [scale * k for k in ops] for key, ops in kraus.items()}
    m_bar = Channel.from_kraus(m.source, m.target, r, kraus)

    omega_bar = split.omega_bar / (np.linalg.norm(split.omega_bar) * np.sqrt(r))
    w_bar = ResourceState.pure(omega_bar)
    logger.debug("[Schemes] reduced by omega: rank %d, scale %.15g", r, scale)
    return ReducedProblem(m_bar, w_bar, split, scale)


def extend_left_inverse(n_bar: Channel, iota, target_h2: int, anchor=None,
                        tol: Optional[float] = None) -> Channel:
    """N(rho (x) sigma) = N_bar(rho (x) (iota^dag sigma iota + Tr((1 - iota iota^dag) sigma) anchor))."""
    tol = Config.TOL if tol is None else tol
    n_bar = _matrix(n_bar)
    iota = np.asarray(iota, dtype=complex)
    r = n_bar.aux
    if iota.shape != (target_h2, r):
        raise ShapeMismatchError(f"iota must be {target_h2}x{r}, got {iota.shape}")
    if isometry_residual(iota) > tol:
        raise NotAnIsometryError("iota is not an isometry")
    anchor = np.eye(r, dtype=complex) / r if anchor is None else np.asarray(anchor, dtype=complex)
    if anchor.shape != (r, r):
        raise ShapeMismatchError(f"anchor must be {r}x{r}")
    weights, vectors = eigh_desc(anchor)
    if op_norm(anchor - anchor.conj().T) > tol or weights[-1] < -tol:
        raise NormalizationError(f"anchor is not positive semidefinite (smallest eigenvalue {weights[-1]:.3e})")
    if abs(np.trace(anchor) - 1) > tol:
        raise NormalizationError(f"anchor must have trace 1, got {np.trace(anchor).real:.6g}")

    compress = [iota.conj().T]
    complement = orthonormal_complement(iota)
    for p, u in zip(weights, vectors.T):
        if p <= 0:
            continue
        for v in complement.T:
            compress.append(np.sqrt(p) * np.outer(u, v.conj()))

    kraus = {}
    for (j, i), ops in n_bar.kraus_operators().items():
        e = n_bar.source.factors[j]
        kraus[(j, i)] = [k @ np.kron(c, np.eye(e)) for k in ops for c in compress]
    return Channel.from_kraus(n_bar.source, n_bar.target, target_h2, kraus)


# ----------------------------------------------------------------------
# Reversibility
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class DimensionVerdict:
    source_dim: int
    target_dim: int
    source_margins: Tuple[int, ...] = ()
    target_margins: Tuple[int, ...] = ()

    @property
    def satisfied(self) -> bool:
        return self.source_dim <= self.target_dim

    @property
    def equal(self) -> bool:
        return self.source_dim == self.target_dim


@dataclass(frozen=True, eq=False)
class ReversibilityCertificate:
    kind: str
    verdict: bool
    solve_residual: float
    pair_residuals: Dict[Tuple[int, int], float]
    nu: Dict[Tuple[int, int], BlockMap]
    kappa: Optional[BlockMap]
    isometry_residuals: Tuple[float, float]
    coisometry_residuals: Tuple[float, float]
    positive: bool
    dims: DimensionVerdict
    tolerance: float
    reduced: Optional[ReducedProblem] = None
    nu_blocks: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)
    kappa_min_singular: Optional[float] = None

    def __bool__(self):
        return self.verdict


def dimension_inequalities(cert: ReversibilityCertificate) -> Dict[str, Tuple[int, ...]]:
    """Per-factor slack of sum_j e_j r_ji >= h d_i and sum_i d_i r_ji <= h e_j.

    Both margins are nonnegative on every certified instance; summing them
    gives dim(A) <= dim(B).
    """
    return {"source": cert.dims.source_margins, "target": cert.dims.target_margins}


def _error_vectors(d: Dilation, components, h1: int, h2: int) -> Dict[Tuple[int, int], np.ndarray]:
    """F[(i, j)] indexed [c*r + k, (y, b), x]: sqrt(p) (1 (x) omega) acting on the bent Kraus operators."""
    s = float(h1 * h2) ** 0.25
    out = {}
    for i, di in enumerate(d.source.factors):
        for j, e in enumerate(d.target.factors):
            t = d.kraus_tensor(i, j)
            parts = [
                np.sqrt(p) * s * np.einsum("ba,kyax->kybx", omega, t).reshape(t.shape[0], e * h2, di)
                for p, omega in components
            ]
            out[(i, j)] = np.concatenate(parts, axis=0) if parts else np.zeros((0, e * h2, di))
    return out


def _columns(f: np.ndarray) -> np.ndarray:
    """[m, z, x] -> z x (m, x) matrix."""
    m, z, x = f.shape
    return f.transpose(1, 0, 2).reshape(z, m * x)


def _solve_nu(d: Dilation, f: Dict[Tuple[int, int], np.ndarray], ncomp: int):
    """Fit F_c'^dag F_c = delta_ii' nu (x) 1 blockwise and report the misfit per component pair."""
    m, n = d.source.size, d.target.size
    nu = {}
    pair_res = {(c2, c): 0.0 for c2 in range(ncomp) for c in range(ncomp)}
    for j in range(n):
        for i, di in enumerate(d.source.factors):
            fi = f[(i, j)]
            nu[(j, i)] = np.einsum("kzx,lzx->kl", fi.conj(), fi) / di
        for c2 in range(ncomp):
            for c in range(ncomp):
                cols2, cols, blocks = [], [], []
                for i, di in enumerate(d.source.factors):
                    r = d.env_dims[j][i]
                    cols2.append(_columns(f[(i, j)][c2 * r:(c2 + 1) * r]))
                    cols.append(_columns(f[(i, j)][c * r:(c + 1) * r]))
                    sub = nu[(j, i)][c2 * r:(c2 + 1) * r, c * r:(c + 1) * r]
                    blocks.append(np.kron(sub, np.eye(di)))
                p2, p = np.hstack(cols2), np.hstack(cols)
                gram = p2.conj().T @ p
                expected = sla.block_diag(*blocks) if blocks else np.zeros(gram.shape)
                pair_res[(c2, c)] = max(pair_res[(c2, c)], op_norm(gram - expected))
    return nu, pair_res


def _nu_boxes(d: Dilation, nu: Dict[Tuple[int, int], np.ndarray], ncomp: int) -> Dict[Tuple[int, int], BlockMap]:
    env_dual = d.environment.dual()
    boxes = {}
    for c2 in range(ncomp):
        for c in range(ncomp):
            def fill(s, t, c2=c2, c=c):
                i, j = s
                r = d.env_dims[j][i]
                return nu[(j, i)][c2 * r:(c2 + 1) * r, c * r:(c + 1) * r]

            boxes[(c2, c)] = BlockMap.build((env_dual,), (env_dual,), fill)
    return boxes


def _kappa(d: Dilation, nu: Dict[Tuple[int, int], np.ndarray]) -> BlockMap:
    """kappa = n_X^-1/2 (x) nu^-1/2 (x) n_Y^1/2 on E*."""
    n_x, n_y = _half_dimensions(d)
    root = BlockMap.build(
        (d.environment.dual(),), (d.environment.dual(),),
        lambda s, t: psd_power(nu[(s[1], s[0])], -0.5),
    )
    return tensor(tensor(n_x.sqrt().inverse().as_blockmap(), root), n_y.sqrt().as_blockmap())


def kappa_composite(d: Dilation, omega, kappa: BlockMap) -> BlockMap:
    """(omega (x) 1_Y) o tau bent around H and E o (1_X (x) kappa): X (x) E* -> H2 (x) Y.

    The bent dilation carries the discs n_X^1/2 and n_Y^-1/2, and omega the
    factor (h1 h2)^1/4. The composite is an isometry exactly when kappa
    certifies reversibility, and unitary when in addition dim(A) = dim(B).
    """
    omega = np.asarray(omega, dtype=complex)
    h2, h1 = omega.shape
    if h1 != d.aux:
        raise ShapeMismatchError(f"omega is {h2}x{h1} but the dilation has auxiliary dimension {d.aux}")
    x_wire, y_wire = d.tau.source[1], d.tau.target[0]
    n_x, n_y = _half_dimensions(d)
    bent = _with_discs(_rotated(d), n_x.sqrt(), n_y.sqrt().inverse())
    act = tensor(BlockMap.from_matrix(float(h1 * h2) ** 0.25 * omega), identity((y_wire,)))
    return compose(act, compose(bent, tensor(identity((x_wire,)), kappa)))


def _composite_isometries(d: Dilation, composite: BlockMap, h2: int) -> Dict[int, np.ndarray]:
    """Regroup the composite per target factor: rows (y, b), columns (k, x) stacked over i."""
    out = {}
    for j, e in enumerate(d.target.factors):
        cols = []
        for i, di in enumerate(d.source.factors):
            r = d.env_dims[j][i]
            block = composite[((0, i, j), (0, 0, j))]
            cols.append(block.reshape(h2, e, di, r).transpose(1, 0, 3, 2).reshape(e * h2, r * di))
        out[j] = np.hstack(cols)
    return out


def _recovery_isometries(d: Dilation, f, nu) -> Dict[int, np.ndarray]:
    """P_j = [F_ji (nu_ji^{-1/2} (x) 1)]_i, the mixed-state counterpart of the kappa composite."""
    out = {}
    for j in range(d.target.size):
        cols = []
        for i, di in enumerate(d.source.factors):
            root = psd_power(nu[(j, i)], -0.5)
            cols.append(_columns(f[(i, j)]) @ np.kron(root, np.eye(di)))
        out[j] = np.hstack(cols)
    return out


def _recovery_channel(d: Dilation, p_maps: Dict[int, np.ndarray], counts: Dict[Tuple[int, int], int],
                      h2: int) -> Channel:
    """Recovery B (x) B(H2) -> A with Kraus operators the rows of P_j^dag.

    P_j is replaced by its polar partial isometry and the channel is completed
    on the orthogonal complement of its range.
    """
    kraus = {}
    for j, e in enumerate(d.target.factors):
        p = polar_isometry(p_maps[j])
        adj = p.conj().T
        offset = 0
        for i, di in enumerate(d.source.factors):
            count = counts[(i, j)]
            rows = adj[offset:offset + count * di].reshape(count, di, e * h2)
            offset += count * di
            kraus[(j, i)] = [_aux_first(r, di, e, h2) for r in rows]
        d0 = d.source.factors[0]
        for v in orthonormal_complement(p).T:
            k = np.zeros((d0, e * h2), dtype=complex)
            k[0] = v.conj()
            kraus[(j, 0)].append(_aux_first(k, d0, e, h2))
    return Channel.from_kraus(d.target, d.source, h2, kraus)


def _aux_first(k: np.ndarray, di: int, e: int, h2: int) -> np.ndarray:
    """Reorder columns from (y, b) to the channel input order (b, y)."""
    return k.reshape(di, e, h2).transpose(0, 2, 1).reshape(di, h2 * e)


def _psd(blocks, psd_tol: float) -> bool:
    scale = max((float(eigh_desc(b)[0][0]) for b in blocks if b.size), default=0.0)
    for b in blocks:
        if b.size and eigh_desc(b)[0][-1] < -psd_tol * max(scale, 1e-300):
            return False
    return True


def is_entanglement_reversible(m: Channel, w: ResourceState, tol: Optional[float] = None,
                               verdict_tol: Optional[float] = None,
                               rank_tol: Optional[float] = None) -> Tuple[bool, ReversibilityCertificate]:
    tol = Config.TOL if tol is None else tol
    verdict_tol = Config.VERDICT_TOL if verdict_tol is None else verdict_tol
    rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
    m = _matrix(m)
    if m.aux != w.h1:
        raise ShapeMismatchError(f"channel auxiliary dimension {m.aux} does not match h1 = {w.h1}")

    if w.kind == "pure":
        reduced = reduce_by_omega(m, w, rank_tol)
        d = minimal_dilation(reduced.channel)
        h1 = h2 = reduced.split.rank
        components = [(1.0, reduced.state.omega)]
    else:
        reduced = None
        d = minimal_dilation(m)
        h1, h2 = w.h1, w.h2
        components = list(w.components)

    f = _error_vectors(d, components, h1, h2)
    nu, pair_res = _solve_nu(d, f, len(components))
    solve_res = max(pair_res.values(), default=0.0)
    positive = _psd(nu.values(), Config.PSD_TOL)

    kappa, kappa_min = None, None
    if w.kind == "pure":
        kappa = _kappa(d, nu)
        kappa_min = min(
            (float(sla.svdvals(b)[-1]) for b in kappa.blocks.values() if b.size), default=0.0
        )
        iso_a, coiso_a = unitarity_residuals(kappa_composite(d, reduced.state.omega, kappa))
    else:
        p_maps = _recovery_isometries(d, f, nu)
        iso_a = max(
            op_norm((p.conj().T @ p) @ (p.conj().T @ p) - p.conj().T @ p) for p in p_maps.values()
        )
        coiso_a = max(coisometry_residual(p) for p in p_maps.values())
    iso_b, coiso_b = unitarity_residuals(d.tau)
    invertible = kappa_min is None or kappa_min > rank_tol

    source_margins = tuple(
        sum(e * d.env_dims[j][i] for j, e in enumerate(d.target.factors)) - d.aux * di
        for i, di in enumerate(d.source.factors)
    )
    target_margins = tuple(
        h2 * e - sum(di * d.env_dims[j][i] for i, di in enumerate(d.source.factors))
        for j, e in enumerate(d.target.factors)
    )
    dims = DimensionVerdict(m.source.dim, m.target.dim, source_margins, target_margins)

    verdict = (
        solve_res < verdict_tol
        and positive
        and invertible
        and iso_a < verdict_tol
        and iso_b < verdict_tol
        and dims.satisfied
    )
    if verdict and w.kind == "pure" and (max(coiso_a, coiso_b) < verdict_tol) != dims.equal:
        logger.warning(
            "[Schemes] kappa composite coisometry residual %.3e disagrees with dim(A) = %d, dim(B) = %d",
            coiso_a, dims.source_dim, dims.target_dim,
        )
    cert = ReversibilityCertificate(
        kind=w.kind,
        verdict=verdict,
        solve_residual=solve_res,
        pair_residuals=pair_res,
        nu=_nu_boxes(d, nu, len(components)),
        kappa=kappa,
        isometry_residuals=(iso_a, iso_b),
        coisometry_residuals=(coiso_a, coiso_b),
        positive=positive,
        dims=dims,
        tolerance=verdict_tol,
        reduced=reduced,
        nu_blocks=nu,
        kappa_min_singular=kappa_min,
    )
    logger.debug("[Schemes] reversibility verdict=%s solve residual %.3e", verdict, solve_res)
    return verdict, cert


def _candidate_left_inverse(m: Channel, w: ResourceState, cert: ReversibilityCertificate) -> Channel:
    m = _matrix(m)
    if cert.kind == "pure":
        red = cert.reduced
        d = minimal_dilation(red.channel)
        r = red.split.rank
        composite = kappa_composite(d, red.state.omega, cert.kappa)
        counts = {(i, j): d.env_dims[j][i] for i in range(d.source.size) for j in range(d.target.size)}
        n_bar = _recovery_channel(d, _composite_isometries(d, composite, r), counts, r)
        return extend_left_inverse(n_bar, red.split.iota, w.h2)
    d = minimal_dilation(m)
    f = _error_vectors(d, list(w.components), w.h1, w.h2)
    counts = {key: block.shape[0] for key, block in f.items()}
    return _recovery_channel(d, _recovery_isometries(d, f, cert.nu_blocks), counts, w.h2)


def entanglement_left_inverse(m: Channel, w: ResourceState, cert: ReversibilityCertificate) -> Channel:
    """The left inverse whose dilation is the dagger of the kappa composite, extended along iota."""
    if cert.kind != "pure" or w.kind != "pure":
        raise InvalidCertificateError("the left inverse is built from a pure certificate")
    if not cert.verdict:
        raise InvalidCertificateError("certificate does not establish reversibility")
    if cert.reduced is None or cert.kappa is None:
        raise InvalidCertificateError("certificate carries no reduction or kappa to build from")
    if not cert.dims.equal:
        raise DimensionMismatchError(
            f"the left inverse is unique only when dim(A) = dim(B) "
            f"({cert.dims.source_dim} vs {cert.dims.target_dim})"
        )
    return _candidate_left_inverse(m, w, cert)


# ----------------------------------------------------------------------
# Intertwiners and invertibility
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class IntertwinerReport:
    verdict: bool
    residual: float
    u: BlockMap
    tolerance: float

    def __bool__(self):
        return self.verdict


def _intertwine(f, d1: Dilation, d2: Dilation, tol: float) -> IntertwinerReport:
    if (d1.source, d1.target) != (d2.source, d2.target):
        raise ShapeMismatchError("intertwiners relate bijections between the same algebras")
    f = np.asarray(f, dtype=complex)
    if f.shape != (d2.aux, d1.aux):
        raise ShapeMismatchError(f"f must be {d2.aux}x{d1.aux}, got {f.shape}")
    worst = 0.0

    def fill(s, t):
        nonlocal worst
        j, i = s
        di, e = d1.source.factors[i], d1.target.factors[j]
        n = d1.aux * di
        k1 = np.array(d1.kraus(i, j)).reshape(-1, e * n)
        k2 = np.array(d2.kraus(i, j)).reshape(-1, e, d2.aux * di)
        lhs = (k2 @ np.kron(f, np.eye(di))).reshape(-1, e * n)
        if k1.shape[0] == 0:
            u = np.zeros((lhs.shape[0], 0), dtype=complex)
        else:
            x, *_ = np.linalg.lstsq(k1.T, lhs.T, rcond=None)
            u = x.T
        diff = (lhs - u @ k1).reshape(-1, e, n).transpose(1, 0, 2).reshape(-1, n)
        worst = max(worst, op_norm(diff))
        return u

    u = BlockMap.build((d1.environment,), (d2.environment,), fill)
    return IntertwinerReport(worst < tol, worst, u, tol)


def is_intertwiner(f, m1: Union[QuantumBijection, Dilation], m2: Union[QuantumBijection, Dilation],
                   tol: Optional[float] = None) -> IntertwinerReport:
    """Is there u: E1 -> E2 with tau2 (f (x) 1) = (1 (x) u) tau1 blockwise?"""
    tol = Config.VERDICT_TOL if tol is None else tol
    d1 = m1.dilation if isinstance(m1, QuantumBijection) else m1
    d2 = m2.dilation if isinstance(m2, QuantumBijection) else m2
    return _intertwine(f, d1, d2, tol)


@dataclass(frozen=True, eq=False)
class InvertibilityEvidence:
    verdict: bool
    kind: str
    reversibility: ReversibilityCertificate
    candidate: Channel
    oracle: PairResiduals
    oracle_agrees: bool
    biunitarity: Optional[BiunitarityReport] = None
    intertwiner: Optional[IntertwinerReport] = None
    components: Tuple["InvertibilityEvidence", ...] = ()

    @property
    def inverse(self) -> Optional[Channel]:
        return self.candidate if self.verdict else None

    def __bool__(self):
        return self.verdict


def is_entanglement_invertible(m: Channel, w: ResourceState, tol: Optional[float] = None,
                               verdict_tol: Optional[float] = None) -> InvertibilityEvidence:
    """Pure W: biunitary reduced channel whose (omega_bar^dag omega_bar)^T intertwines.

    Mixed W: reversible and every pure component invertible. A candidate
    inverse is always built and checked against the superoperator oracle.
    """
    tol = Config.TOL if tol is None else tol
    verdict_tol = Config.VERDICT_TOL if verdict_tol is None else verdict_tol
    m = _matrix(m)
    reversible, cert = is_entanglement_reversible(m, w, tol=tol, verdict_tol=verdict_tol)
    candidate = _candidate_left_inverse(m, w, cert)
    oracle = check_entanglement_pair(m, candidate, w)
    oracle_ok = max(oracle) < verdict_tol

    if w.kind == "pure":
        red = cert.reduced
        d = minimal_dilation(red.channel)
        bu = biunitarity(d, tol=verdict_tol)
        omega_bar = red.state.omega
        it = _intertwine((omega_bar.conj().T @ omega_bar).T, d, d, verdict_tol)
        verdict = bu.verdict and it.verdict
        evidence = InvertibilityEvidence(
            verdict, "pure", cert, candidate, oracle, verdict == oracle_ok, bu, it
        )
    else:
        parts = tuple(
            is_entanglement_invertible(m, part, tol=tol, verdict_tol=verdict_tol)
            for part in w.pure_components()
        )
        verdict = reversible and all(p.verdict for p in parts)
        evidence = InvertibilityEvidence(
            verdict, "mixed", cert, candidate, oracle, verdict == oracle_ok, components=parts
        )
    if not evidence.oracle_agrees:
        logger.warning(
            "[Schemes] invertibility verdict %s disagrees with oracle residuals %s",
            verdict, tuple(oracle),
        )
    return evidence
