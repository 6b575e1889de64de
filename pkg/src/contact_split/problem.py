"""Discrete frictionless contact problem ``(K, B, D, F_ext)``.

Find ``U`` and ``lam >= 0`` with::

    K U + B^T lam = F_ext
    B U <= D
    lam * (B U - D) = 0

Sign convention: a positive entry of ``B U - D`` is a penetration, and rows of
``B`` are oriented so that a positive multiplier pushes the bodies apart.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from . import linalg
from .exceptions import DimensionMismatch, SingularMatrix

__all__ = ["ContactProblem", "KKTResidual", "validate", "residual_kkt", "save_bundle", "load_bundle"]


@dataclass(frozen=True, eq=False)
class ContactProblem:
    """Immutable container for the contact system.

    Attributes
    ----------
    K : csr_matrix, shape (N, N)
        Stiffness matrix (N/m), symmetric positive definite.
    B : csr_matrix, shape (N_lam, N)
        Pairing matrix mapping displacements to normal gaps.
    D : ndarray, shape (N_lam,)
        Initial gaps (m).
    F_ext : ndarray, shape (N,)
        External loads (N), including Dirichlet lifting terms.
    labels : tuple of str, optional
        Names of the contact pairs.
    meta : dict
        Free-form metadata (description, closed forms, geometry...).
    """

    K: sp.csr_matrix
    B: sp.csr_matrix
    D: np.ndarray
    F_ext: np.ndarray
    labels: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        K = linalg.sparse_sym(self.K)
        B = linalg.sparse_rect(self.B)
        D = np.array(self.D, dtype=float).ravel()
        F = np.array(self.F_ext, dtype=float).ravel()
        D.setflags(write=False)
        F.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "F_ext", F)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "meta", dict(self.meta))
        if K.shape[0] != F.shape[0] or B.shape[1] != K.shape[0] or B.shape[0] != D.shape[0]:
            raise DimensionMismatch(
                f"inconsistent sizes: K {K.shape}, B {B.shape}, D {D.shape}, F_ext {F.shape}")
        if self.labels and len(self.labels) != D.shape[0]:
            raise DimensionMismatch("one label per contact pair is required")

    @property
    def n_dof(self):
        return self.K.shape[0]

    @property
    def n_pairs(self):
        return self.B.shape[0]

    def gap(self, U):
        """Signed gap violation ``B U - D`` (positive means penetration)."""
        return linalg.spmv(self.B, U) - self.D

    def contact_forces(self, lam):
        """Nodal contact forces ``F_C = -B^T lam``."""
        return -linalg.spmv(self.B, lam, transpose=True)


def validate(p):
    """List every violated invariant of `p`; an empty list means well posed."""
    report = []
    n = p.n_dof
    if p.K.shape != (n, n):
        report.append(f"K has shape {p.K.shape}")
    if p.B.shape[1] != n:
        report.append(f"B has {p.B.shape[1]} columns, expected {n}")
    if p.D.shape[0] != p.B.shape[0]:
        report.append(f"D has length {p.D.shape[0]}, expected {p.B.shape[0]}")
    if p.F_ext.shape[0] != n:
        report.append(f"F_ext has length {p.F_ext.shape[0]}, expected {n}")
    row_nnz = np.diff(p.B.indptr)
    row_abs = np.asarray(abs(p.B).sum(axis=1)).ravel()
    for j in np.flatnonzero((row_nnz == 0) | (row_abs == 0.0)):
        name = p.labels[j] if p.labels else str(j)
        report.append(f"B row {name} is all zero")
    for name, vec in (("D", p.D), ("F_ext", p.F_ext)):
        if not np.all(np.isfinite(vec)):
            report.append(f"{name} has non-finite entries")
    if np.any(p.D < 0):
        warnings.warn(f"{int(np.sum(p.D < 0))} pairs have a negative initial gap (initial overlap)",
                      stacklevel=2)
    try:
        linalg.factorize(p.K)
    except SingularMatrix as exc:
        report.append(f"K is not positive definite: {exc}")
    return report


class KKTResidual(NamedTuple):
    equilibrium: float
    penetration: float
    negativity: float
    complementarity: float


def residual_kkt(p, U, lam):
    """Violation of each of the contact conditions at ``(U, lam)``.

    ``equilibrium`` is relative to ``||F_ext||`` (absolute if the load is
    zero); the other three are absolute maxima.
    """
    U = np.asarray(U, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if U.shape != (p.n_dof,) or lam.shape != (p.n_pairs,):
        raise DimensionMismatch(f"U {U.shape} / lam {lam.shape} do not match problem ({p.n_dof}, {p.n_pairs})")
    res = p.K @ U + p.B.T @ lam - p.F_ext
    fnorm = np.linalg.norm(p.F_ext)
    eq = np.linalg.norm(res) / (fnorm if fnorm > 0 else 1.0)
    if p.n_pairs == 0:
        return KKTResidual(float(eq), 0.0, 0.0, 0.0)
    g = p.gap(U)
    return KKTResidual(
        float(eq),
        float(max(0.0, g.max())),
        float(max(0.0, (-lam).max())),
        float(np.abs(lam * g).max()),
    )


# -- bundle directory ---------------------------------------------------------

def _format_meta(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_bundle(p, directory):
    """Write `p` as ``K.mtx``, ``B.mtx``, ``D.vec``, ``F.vec`` and ``meta.txt``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    linalg.write_mtx(d / "K.mtx", p.K)
    linalg.write_mtx(d / "B.mtx", p.B)
    linalg.write_vec(d / "D.vec", p.D)
    linalg.write_vec(d / "F.vec", p.F_ext)
    meta = {"N": p.n_dof, "N_lambda": p.n_pairs}
    meta.update(p.meta)
    lines = []
    for key, value in meta.items():
        text = _format_meta(value)
        if "\n" in text:
            raise ValueError(f"metadata value for {key!r} spans several lines")
        lines.append(f"{key} = {text}")
    if p.labels:
        lines.append("labels = " + ",".join(p.labels))
    (d / "meta.txt").write_text("\n".join(lines) + "\n")
    return d


def _parse_meta_value(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_bundle(directory):
    d = Path(directory)
    meta, labels = {}, ()
    meta_path = d / "meta.txt"
    if meta_path.exists():
        for line in meta_path.read_text().splitlines():
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "labels":
                labels = tuple(value.split(",")) if value else ()
            else:
                meta[key] = _parse_meta_value(value)
    K = linalg.read_mtx(d / "K.mtx")
    B = linalg.read_mtx(d / "B.mtx")
    D = linalg.read_vec(d / "D.vec")
    F = linalg.read_vec(d / "F.vec")
    n_expected, m_expected = meta.pop("N", K.shape[0]), meta.pop("N_lambda", B.shape[0])
    if (n_expected, m_expected) != (K.shape[0], B.shape[0]):
        raise DimensionMismatch(f"{d}: meta says N={n_expected}, N_lambda={m_expected}")
    return ContactProblem(K, B, D, F, labels=labels, meta=meta)
