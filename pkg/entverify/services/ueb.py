"""Unitary error bases and the tight teleportation / dense coding schemes built from them."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import Config
from ..errors import InvalidUEBError, ShapeMismatchError
from .algebra import MultimatrixAlgebra, ResourceState
from .channel import Channel, minimal_dilation, to_convention
from .linalg import haar_unitary, op_norm
from .schemes import ReversibilityCertificate, is_entanglement_reversible

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UEBReport:
    verdict: bool
    d: int
    count: int
    count_ok: bool
    unitarity_residual: float
    orthogonality_residual: float
    tolerance: float

    def __bool__(self):
        return self.verdict


def _stack(candidate) -> np.ndarray:
    mats = [np.asarray(m, dtype=complex) for m in candidate]
    if not mats:
        raise ShapeMismatchError("a unitary error basis needs at least one element")
    d = mats[0].shape[0] if mats[0].ndim == 2 else -1
    for k, m in enumerate(mats):
        if m.ndim != 2 or m.shape != (d, d):
            raise ShapeMismatchError(f"element {k} has shape {m.shape}, expected square {d}x{d}")
    return np.stack(mats)


def is_ueb(candidate: Sequence, tol: Optional[float] = None) -> UEBReport:
    """Check unitarity, trace orthogonality and the count d^2.

    The orthogonality residual is the largest entry of |G - I| for the
    normalized Gram matrix G[i, j] = Tr(U_i^dag U_j) / d.
    """
    tol = Config.TOL if tol is None else tol
    stack = _stack(candidate)
    n, d, _ = stack.shape
    eye = np.eye(d)
    unitarity = max(op_norm(u.conj().T @ u - eye) for u in stack)
    flat = stack.reshape(n, d * d)
    gram = flat.conj() @ flat.T / d
    orthogonality = float(np.max(np.abs(gram - np.eye(n))))
    count_ok = n == d * d
    verdict = count_ok and unitarity < tol and orthogonality < tol
    return UEBReport(verdict, d, n, count_ok, unitarity, orthogonality, tol)


@dataclass(frozen=True, eq=False)
class UnitaryErrorBasis:
    d: int
    elements: Tuple[np.ndarray, ...]

    def __post_init__(self):
        stack = _stack(self.elements)
        object.__setattr__(self, "elements", tuple(stack))
        if stack.shape[1] != self.d:
            raise InvalidUEBError(f"elements are {stack.shape[1]}x{stack.shape[1]}, expected d={self.d}")
        report = is_ueb(stack)
        if not report:
            raise InvalidUEBError(
                f"not a unitary error basis (count {report.count}, unitarity "
                f"{report.unitarity_residual:.3e}, orthogonality {report.orthogonality_residual:.3e})"
            )

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, idx):
        return self.elements[idx]


def as_ueb(u: Union[UnitaryErrorBasis, Sequence]) -> UnitaryErrorBasis:
    if isinstance(u, UnitaryErrorBasis):
        return u
    stack = _stack(u)
    return UnitaryErrorBasis(stack.shape[1], tuple(stack))


def weyl_basis(d: int) -> UnitaryErrorBasis:
    """Shift-and-clock basis X^a Z^b, element a*d + b."""
    if d < 1:
        raise ShapeMismatchError("dimension must be positive")
    shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    elements = [
        np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
        for a in range(d)
        for b in range(d)
    ]
    return UnitaryErrorBasis(d, tuple(elements))


def random_ueb(d: int, seed: Optional[int] = None) -> UnitaryErrorBasis:
    """V U_i W e^{i theta_i} for Haar-random V, W and random phases."""
    rng = np.random.default_rng(Config.SEED if seed is None else seed)
    v, w = haar_unitary(d, rng), haar_unitary(d, rng)
    phases = np.exp(2j * np.pi * rng.random(d * d))
    return UnitaryErrorBasis(d, tuple(p * (v @ u @ w) for p, u in zip(phases, weyl_basis(d))))


def teleportation_channel(u) -> Channel:
    """B(C^d) with auxiliary C^d measured into [d^2].

    Outcome i has the single Kraus operator vec(U_i)^T / sqrt(d) on H (x) X,
    the measurement undone by dense coding with U_i^dag.
    """
    u = as_ueb(u)
    d = u.d
    kraus = {(0, i): [el.reshape(1, d * d) / np.sqrt(d)] for i, el in enumerate(u)}
    return Channel.from_kraus(MultimatrixAlgebra.matrix(d), MultimatrixAlgebra.classical(d * d), d, kraus)


def dense_coding_channel(u) -> Channel:
    """[d^2] with auxiliary C^d into B(C^d): (i, rho) -> U_i^dag rho U_i."""
    u = as_ueb(u)
    d = u.d
    kraus = {(i, 0): [el.conj().T] for i, el in enumerate(u)}
    return Channel.from_kraus(MultimatrixAlgebra.classical(d * d), MultimatrixAlgebra.matrix(d), d, kraus)


def match_up_to_phase(u, v) -> Tuple[List[int], List[complex], float]:
    """Pair v[perm[i]] with phase[i] * u[i], greedily on |Tr(u_i^dag v_j)| / d."""
    a, b = _stack(u), _stack(v)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"cannot match {a.shape} against {b.shape}")
    n, d, _ = a.shape
    overlap = np.einsum("iab,jab->ij", a.conj(), b) / d
    score = np.abs(overlap)
    perm: List[Optional[int]] = [None] * n
    free_rows, free_cols = set(range(n)), set(range(n))
    for flat in np.argsort(-score, axis=None, kind="stable"):
        i, j = divmod(int(flat), n)
        if i in free_rows and j in free_cols:
            perm[i] = j
            free_rows.discard(i)
            free_cols.discard(j)
            if not free_rows:
                break
    phases = []
    worst = 0.0
    for i, j in enumerate(perm):
        z = overlap[i, j]
        phase = z / abs(z) if abs(z) > 0 else 1.0
        phases.append(complex(phase))
        worst = max(worst, op_norm(b[j] - phase * a[i]))
    return [int(j) for j in perm], phases, worst


# ----------------------------------------------------------------------
# Classifiers
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Refusal:
    stage: str
    message: str
    residuals: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class EntanglementCertificate:
    """d * omega is unitary up to ``residual``."""

    scale: float
    residual: float
    tolerance: float


@dataclass(frozen=True, eq=False)
class Classification:
    accepted: bool
    ueb: Optional[UnitaryErrorBasis]
    certificate: Optional[EntanglementCertificate]
    refusal: Optional[Refusal]
    residuals: Dict[str, float]
    reversibility: Optional[ReversibilityCertificate] = None

    def __bool__(self):
        return self.accepted


def _omega_unitarity(w: ResourceState, d: int) -> float:
    scaled = d * w.components[0][1]
    return op_norm(scaled.conj().T @ scaled - np.eye(scaled.shape[1]))


def _refuse(stage, message, residuals, cert=None) -> Classification:
    logger.info("[UEB] refused at %s: %s", stage, message)
    return Classification(False, None, None, Refusal(stage, message, dict(residuals)), dict(residuals), cert)


def _classify(c: Channel, w: ResourceState, d: int, extract, tol: float,
              verdict_tol: float) -> Classification:
    residuals: Dict[str, float] = {}
    if len(w.components) == 1:
        residuals["omega_unitarity"] = _omega_unitarity(w, d)

    dil = minimal_dilation(c)
    env_total = sum(sum(row) for row in dil.env_dims)
    residuals["environment_excess"] = float(abs(env_total - d * d))
    if any(r != 1 for row in dil.env_dims for r in row if r) or env_total != d * d:
        return _refuse("tightness", f"environment dimensions {dil.env_dims} are not all one", residuals)

    elements = extract(dil)
    report = is_ueb(elements, tol)
    residuals["unitarity"] = report.unitarity_residual
    residuals["orthogonality"] = report.orthogonality_residual
    if not report:
        return _refuse("ueb", "extracted maps do not form a unitary error basis", residuals)

    reversible, cert = is_entanglement_reversible(c, w, tol=tol, verdict_tol=verdict_tol)
    residuals["solve"] = cert.solve_residual
    if not reversible:
        return _refuse("reversibility", "the channel is not entanglement-reversible for this state",
                       residuals, cert)

    if len(w.components) != 1:
        return _refuse("purity", "the state W is not pure", residuals, cert)

    if residuals["omega_unitarity"] >= verdict_tol:
        return _refuse("max_entanglement", "d * omega is not unitary", residuals, cert)

    certificate = EntanglementCertificate(float(d), residuals["omega_unitarity"], verdict_tol)
    ueb = UnitaryErrorBasis(d, tuple(elements))
    logger.info("[UEB] classified tight scheme at d=%d", d)
    return Classification(True, ueb, certificate, None, residuals, cert)


def _tight_shape(c: Channel, w: ResourceState, d: int, what: str) -> None:
    if c.aux != d or w.h1 != d or w.h2 != d:
        raise ShapeMismatchError(
            f"{what} needs auxiliary and state dimensions {d}, got {c.aux} and ({w.h1}, {w.h2})"
        )


def classify_tight_teleportation(m: Channel, w: ResourceState, tol: Optional[float] = None,
                                 verdict_tol: Optional[float] = None) -> Classification:
    """Recover the UEB of a tight teleportation scheme B(C^d) (x) B(C^d) -> [d^2]."""
    tol = Config.TOL if tol is None else tol
    verdict_tol = Config.VERDICT_TOL if verdict_tol is None else verdict_tol
    m = to_convention(m, "matrix")
    if m.source.size != 1:
        raise ShapeMismatchError(f"source must be a single matrix factor, got {m.source.factors}")
    d = m.source.factors[0]
    if m.target != MultimatrixAlgebra.classical(d * d):
        raise ShapeMismatchError(f"target must be [{d * d}], got {m.target.factors}")
    _tight_shape(m, w, d, "tight teleportation")

    def extract(dil):
        return [np.sqrt(d) * dil.kraus(0, i)[0].reshape(d, d) for i in range(d * d)]

    return _classify(m, w, d, extract, tol, verdict_tol)


def classify_tight_dense_coding(n: Channel, w: ResourceState, tol: Optional[float] = None,
                                verdict_tol: Optional[float] = None) -> Classification:
    """Recover the UEB of a tight dense coding scheme [d^2] (x) B(C^d) -> B(C^d)."""
    tol = Config.TOL if tol is None else tol
    verdict_tol = Config.VERDICT_TOL if verdict_tol is None else verdict_tol
    n = to_convention(n, "matrix")
    if n.target.size != 1:
        raise ShapeMismatchError(f"target must be a single matrix factor, got {n.target.factors}")
    d = n.target.factors[0]
    if n.source != MultimatrixAlgebra.classical(d * d):
        raise ShapeMismatchError(f"source must be [{d * d}], got {n.source.factors}")
    _tight_shape(n, w, d, "tight dense coding")

    def extract(dil):
        return [dil.kraus(i, 0)[0].conj().T for i in range(d * d)]

    return _classify(n, w, d, extract, tol, verdict_tol)
