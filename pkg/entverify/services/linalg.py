"""Small dense linear-algebra helpers shared by the services."""
import numpy as np
from scipy import linalg as sla

from ..config import Config


def op_norm(a) -> float:
    """Operator (spectral) norm; empty matrices have norm 0."""
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_part(a):
    a = np.asarray(a, dtype=complex)
    return (a + a.conj().T) / 2


def fix_phase(v):
    """Rotate a vector so that its largest-magnitude entry is real positive."""
    v = np.asarray(v, dtype=complex)
    if v.size == 0:
        return v
    idx = int(np.argmax(np.abs(v)))
    pivot = v[idx]
    if abs(pivot) == 0:
        return v
    return v * (abs(pivot) / pivot)


def eigh_desc(a):
    """Eigendecomposition of the hermitian part of ``a``, largest eigenvalue first."""
    a = hermitian_part(a)
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=complex)
    w, v = sla.eigh(a)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def rank_cutoff(values, rank_tol=None, scale=None) -> float:
    rank_tol = Config.RANK_TOL if rank_tol is None else rank_tol
    values = np.abs(np.asarray(values, dtype=float))
    if scale is None:
        scale = float(values.max()) if values.size else 0.0
    return rank_tol * scale


def numerical_rank(values, rank_tol=None, scale=None) -> int:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0
    cutoff = rank_cutoff(values, rank_tol, scale)
    return int(np.sum(values > cutoff)) if cutoff > 0 else int(np.sum(values > 0))


def psd_power(a, power, rank_tol=None):
    """``a ** power`` for a positive semidefinite ``a``.

    Negative powers are taken on the support only (Moore-Penrose style).
    """
    w, v = eigh_desc(a)
    if w.size == 0:
        return np.zeros((0, 0), dtype=complex)
    w = np.clip(w, 0.0, None)
    cutoff = rank_cutoff(w, rank_tol)
    scaled = np.zeros_like(w)
    keep = w > cutoff if cutoff > 0 else w > 0
    scaled[keep] = w[keep] ** power
    return (v * scaled) @ v.conj().T


def isometry_residual(v) -> float:
    v = np.asarray(v)
    return op_norm(v.conj().T @ v - np.eye(v.shape[1]))


def coisometry_residual(v) -> float:
    v = np.asarray(v)
    return op_norm(v @ v.conj().T - np.eye(v.shape[0]))


def polar_isometry(a, rank_tol=None):
    """Partial isometry of the polar decomposition of ``a``."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return np.zeros(a.shape, dtype=complex)
    u, s, vh = sla.svd(a, full_matrices=False)
    r = numerical_rank(s, rank_tol)
    return u[:, :r] @ vh[:r, :]


def orthonormal_complement(p, rank_tol=None):
    """Orthonormal columns spanning the orthogonal complement of range(p)."""
    p = np.asarray(p, dtype=complex)
    n = p.shape[0]
    if p.shape[1] == 0 or not np.any(p):
        return np.eye(n, dtype=complex)
    u, s, _ = sla.svd(p, full_matrices=True)
    r = numerical_rank(s, rank_tol)
    return u[:, r:]


def haar_unitary(d, rng):
    """Haar-random d x d unitary from the QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = sla.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))
