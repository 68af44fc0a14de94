"""Eigendecomposition of normalized Laplacians and the four spectral filters.

======  =================  ====================================
kind    name               response at eigenvalue ``lam``
======  =================  ====================================
h1      global low-pass    ``exp(1 - lam)``, Min-Max scaled to [0, 1]
h2      local low-pass     ``1 - lam / lam_n``
h3      global high-pass   ``exp(lam)``, Min-Max scaled to [0, 1]
h4      local high-pass    ``lam / lam_n``
======  =================  ====================================

For the local filters ``lam_n`` defaults to the fixed value 3/2 (so h4 is
``(2/3) L``); the Min-Max scaling of global filters always uses the measured
extreme eigenvalues.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import os
import struct
import tempfile
import threading
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, ShapeError

logger = logging.getLogger(__name__)

LOCAL_LAMBDA_N = 1.5
CACHE_MAGIC = b"PFGCEIG1"


class FilterKind(enum.Enum):
    GLOBAL_LOW_PASS = "h1"
    LOCAL_LOW_PASS = "h2"
    GLOBAL_HIGH_PASS = "h3"
    LOCAL_HIGH_PASS = "h4"

    @property
    def is_global(self) -> bool:
        return self in (FilterKind.GLOBAL_LOW_PASS, FilterKind.GLOBAL_HIGH_PASS)


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Orthonormal eigenvectors (columns) and ascending eigenvalues of a symmetric matrix."""

    eigvecs: np.ndarray
    eigvals: np.ndarray
    source_hash: str

    @property
    def n(self) -> int:
        return self.eigvals.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.eigvals[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigvals[-1])

    def reconstruct(self) -> np.ndarray:
        U = self.eigvecs
        return (U * self.eigvals) @ U.T


def content_hash(matrix) -> str:
    a = np.ascontiguousarray(matrix, dtype="<f8")
    h = hashlib.sha256()
    h.update(struct.pack("<QQ", *a.shape))
    h.update(a.tobytes())
    return h.hexdigest()


def write_eig_file(path, basis: SpectralBasis) -> None:
    """Write ``basis`` as ``PFGCEIG1 | u64 N | N f64 eigvals | N*N f64 eigvecs (row-major)``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(CACHE_MAGIC)
            fh.write(struct.pack("<Q", basis.n))
            fh.write(np.ascontiguousarray(basis.eigvals, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(basis.eigvecs, dtype="<f8").tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_eig_file(path, source_hash: str | None = None) -> SpectralBasis:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(8) != CACHE_MAGIC:
            raise NumericalError(f"{path}: bad magic bytes")
        (n,) = struct.unpack("<Q", fh.read(8))
        vals = np.frombuffer(fh.read(8 * n), dtype="<f8")
        vecs = np.frombuffer(fh.read(8 * n * n), dtype="<f8")
    if vals.size != n or vecs.size != n * n:
        raise NumericalError(f"{path}: truncated cache file")
    vals = vals.astype(np.float64)
    vecs = vecs.astype(np.float64).reshape(n, n)
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return SpectralBasis(vecs, vals, source_hash or path.stem)


class EigenCache:
    """In-memory (and optionally on-disk) cache of decompositions keyed by content hash.

    Concurrent misses on the same key may each compute; they store equal values.
    ``n_computed`` counts actual decompositions.
    """

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._store: dict[str, SpectralBasis] = {}
        self._lock = threading.Lock()
        self.n_computed = 0

    def clear(self) -> None:
        with self._lock:
            self._store.clear()
            self.n_computed = 0

    def _disk_path(self, key: str, directory) -> Path | None:
        d = Path(directory) if directory else self.directory
        return d / f"{key}.eig" if d else None

    def get(self, L, directory=None) -> SpectralBasis:
        L = np.asarray(L, dtype=np.float64)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ShapeError(f"expected a square matrix, got shape {L.shape}")
        if L.size and np.max(np.abs(L - L.T)) > 1e-10:
            raise ShapeError("matrix is not symmetric")
        key = content_hash(L)
        with self._lock:
            hit = self._store.get(key)
        if hit is not None:
            return hit
        disk = self._disk_path(key, directory)
        if disk is not None and disk.is_file():
            basis = read_eig_file(disk, key)
        else:
            basis = _decompose(L, key)
            with self._lock:
                self.n_computed += 1
            if disk is not None:
                disk.parent.mkdir(parents=True, exist_ok=True)
                write_eig_file(disk, basis)
        with self._lock:
            self._store.setdefault(key, basis)
            return self._store[key]


def _decompose(L: np.ndarray, key: str) -> SpectralBasis:
    try:
        vals, vecs = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return SpectralBasis(vecs, vals, key)


_default_cache = EigenCache()


def default_cache() -> EigenCache:
    return _default_cache


def eig_sym(L, cache: EigenCache | None = None, cache_dir=None) -> SpectralBasis:
    """Full symmetric eigendecomposition, memoized by content hash.

    ``cache_dir`` (or the ``PFGC_CACHE_DIR`` environment variable) adds a
    persistent ``<hash>.eig`` sidecar.
    """
    cache = cache or _default_cache
    if cache_dir is None and cache.directory is None:
        cache_dir = os.environ.get("PFGC_CACHE_DIR") or None
    return cache.get(L, cache_dir)


def _as_kind(kind) -> FilterKind:
    if isinstance(kind, FilterKind):
        return kind
    try:
        return FilterKind(kind)
    except ValueError:
        return FilterKind[str(kind).upper()]


def filter_response(kind, basis: SpectralBasis, local_lambda_n: float = LOCAL_LAMBDA_N) -> np.ndarray:
    """Per-eigenvalue response of filter ``kind`` on ``basis``.

    A degenerate spectrum (all eigenvalues equal) makes the Min-Max scaling of
    the global filters undefined; they then respond with all ones and a
    warning is issued.
    """
    kind = _as_kind(kind)
    lam = np.asarray(basis.eigvals, dtype=np.float64)
    if kind.is_global:
        lo, hi = lam[0], lam[-1]
        span = hi - lo
        if span <= 0:
            warnings.warn("degenerate spectrum: global filter response set to ones", RuntimeWarning)
            return np.ones_like(lam)
        if kind is FilterKind.GLOBAL_LOW_PASS:
            # (e^{1-lam} - e^{1-hi}) / (e^{1-lo} - e^{1-hi}), rescaled by e^{lo-1}
            return (np.exp(lo - lam) - np.exp(-span)) / -np.expm1(-span)
        return (np.exp(lam - hi) - np.exp(-span)) / -np.expm1(-span)
    if local_lambda_n <= 0:
        scaled = np.zeros_like(lam)
    else:
        scaled = lam / local_lambda_n
    if kind is FilterKind.LOCAL_LOW_PASS:
        return 1.0 - scaled
    return scaled


def filter_matrix(kind, basis: SpectralBasis, local_lambda_n: float = LOCAL_LAMBDA_N) -> np.ndarray:
    """Dense operator ``U diag(response) U^T``."""
    U = basis.eigvecs
    return (U * filter_response(kind, basis, local_lambda_n)) @ U.T


def apply_filter(kind, basis: SpectralBasis, signal, local_lambda_n: float = LOCAL_LAMBDA_N) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[0] != basis.n:
        raise ShapeError(f"signal has {x.shape[0]} rows, basis has {basis.n}")
    U = basis.eigvecs
    coeff = U.T @ x
    resp = filter_response(kind, basis, local_lambda_n)
    coeff = coeff * (resp[:, None] if coeff.ndim == 2 else resp)
    return U @ coeff


def direct_filter_matrix(kind, laplacian, local_lambda_n: float = LOCAL_LAMBDA_N) -> np.ndarray:
    """Operator form of the local filters: ``I - L/lam_n`` (h2) or ``L/lam_n`` (h4)."""
    kind = _as_kind(kind)
    if kind.is_global:
        raise ValueError("direct form exists only for the local filters h2 and h4")
    L = np.asarray(laplacian, dtype=np.float64)
    scaled = L / local_lambda_n
    if kind is FilterKind.LOCAL_LOW_PASS:
        return np.eye(L.shape[0]) - scaled
    return scaled
