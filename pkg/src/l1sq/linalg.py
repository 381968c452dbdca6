"""Dense linear algebra substrate.

Every matrix in this package is a C-contiguous float64 ndarray with finite
entries; every vector is a 1-d float64 ndarray.  The validators here are the
single gate through which external data (files, service payloads, user
arrays) enters, so downstream code can assume well-formed operands and skip
per-call checking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import RankDeficient, ShapeMismatch, ZeroVector

# Relative tolerance for the numerical-rank decision in orthonormalize():
# singular values below RANK_TOL * sigma_max count as zero.
RANK_TOL = 1e-10

# How far columns of a stored basis may drift from exact orthonormality
# before we refuse to treat them as an orthonormal basis.
ORTHO_TOL = 1e-8


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a C-contiguous float64 2-d array.

    Raises ShapeMismatch for wrong dimensionality or empty axes, ValueError
    for non-finite entries.
    """
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-d, got ndim={out.ndim}")
    if out.shape[0] == 0 or out.shape[1] == 0:
        raise ShapeMismatch(f"{name} must be nonempty, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def as_vector(v, name: str = "vector") -> np.ndarray:
    """Validate and convert to a finite float64 1-d array."""
    out = np.ascontiguousarray(v, dtype=np.float64)
    if out.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-d, got ndim={out.ndim}")
    if out.shape[0] == 0:
        raise ShapeMismatch(f"{name} must be nonempty")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def l1_norm(v) -> float:
    """Sum of absolute entries of a vector."""
    return float(np.abs(as_vector(v)).sum())


def matvec(a, v) -> np.ndarray:
    """Matrix-vector product with shape validation.

    Internals use bare ``@`` on already-validated arrays; this is the checked
    entry point for operands of unknown provenance.
    """
    a = as_matrix(a)
    v = as_vector(v)
    if a.shape[1] != v.shape[0]:
        raise ShapeMismatch(
            f"matvec: matrix is {a.shape[0]}x{a.shape[1]} but vector has "
            f"length {v.shape[0]}"
        )
    return a @ v


@dataclass(frozen=True)
class Subspace:
    """An r-dimensional linear subspace of R^D, held as an orthonormal basis.

    ``basis`` is D x r with orthonormal columns (checked at construction to
    within ORTHO_TOL).  Use orthonormalize() to build one from a raw spanning
    set; construct directly only from columns already known orthonormal,
    e.g. when deserializing.
    """

    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = as_matrix(self.basis, "basis")
        if b.shape[0] < b.shape[1]:
            raise ShapeMismatch(
                f"basis is {b.shape[0]}x{b.shape[1]}; rank cannot exceed "
                "ambient dimension"
            )
        gram = b.T @ b
        err = np.max(np.abs(gram - np.eye(b.shape[1])))
        if err > ORTHO_TOL:
            raise ValueError(
                f"basis columns are not orthonormal (max Gram deviation "
                f"{err:.3e} > {ORTHO_TOL:.0e}); use orthonormalize()"
            )
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def project_residual(self, q: np.ndarray) -> np.ndarray:
        """q minus its Euclidean projection onto the subspace."""
        return q - self.basis @ (self.basis.T @ q)


def orthonormalize(raw) -> Subspace:
    """Orthonormal basis for the column span of ``raw``.

    Uses Householder QR with column pivoting for the basis and an SVD for
    the rank decision: ``raw`` must have numerical rank equal to its column
    count, where singular values below RANK_TOL times the largest one count
    as zero.  The returned basis spans the same space as ``raw`` but its
    columns need not correspond to raw's columns (pivoting reorders).

    Raises RankDeficient if the columns are dependent at that tolerance.
    """
    a = as_matrix(raw, "raw basis")
    d, r = a.shape
    if d < r:
        raise ShapeMismatch(f"cannot span rank {r} inside R^{d}")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficient(
            f"columns have numerical rank < {r} "
            f"(smallest/largest singular value = {sv[-1]:.3e}/{sv[0]:.3e})"
        )
    q, _, _ = scipy.linalg.qr(a, mode="economic", pivoting=True)
    return Subspace(np.ascontiguousarray(q[:, :r]))
