"""Batch scoring kernels for the exhaustive similarity scan.

Two implementations with identical signatures: numba-compiled loops and
vectorized numpy. ``FOUNDERFIT_KERNELS`` selects one (``numba``, ``numpy``,
or ``auto``; auto uses numba when it imports).

Inputs are float64 matrices with precomputed squared row norms; majors are
12-bit masks.
"""

from __future__ import annotations

import os

import numpy as np

DEGREE_WEIGHT = 12.0
MAJOR_WEIGHT = 5.0
TOP_WEIGHT = 20.0

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False


def _popcount_numpy(x: np.ndarray) -> np.ndarray:
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(x).astype(np.float64)
    return np.unpackbits(x.astype(">u2").view(np.uint8).reshape(-1, 2), axis=1).sum(axis=1).astype(np.float64)


def _cosines_numpy(q: np.ndarray, q_sq: float, mat: np.ndarray, mat_sq: np.ndarray) -> np.ndarray:
    return np.clip((mat @ q) / np.sqrt(q_sq * mat_sq), -1.0, 1.0)


def cosine_scores_numpy(q, q_sq, mat, mat_sq):
    return _cosines_numpy(q, q_sq, mat, mat_sq)


def founder_scores_numpy(q_desc, q_desc_sq, q_jobs, q_jobs_sq, q_deg, q_top, q_mask,
                         desc, desc_sq, jobs, jobs_sq, degs, tops, masks):
    cd = _cosines_numpy(q_desc, q_desc_sq, desc, desc_sq)
    cj = _cosines_numpy(q_jobs, q_jobs_sq, jobs, jobs_sq)
    shared = _popcount_numpy(np.bitwise_and(masks, np.uint16(q_mask)))
    d_deg = np.abs(degs.astype(np.float64) - float(q_deg))
    d_top = np.abs(tops.astype(np.float64) - float(q_top))
    return -(d_deg / DEGREE_WEIGHT) + cd + cj + shared / MAJOR_WEIGHT - d_top / TOP_WEIGHT


if HAS_NUMBA:
    @numba.njit(cache=True)
    def _cos_row(q, q_sq, mat, i, row_sq):
        acc = 0.0
        for j in range(q.shape[0]):
            acc += q[j] * mat[i, j]
        c = acc / np.sqrt(q_sq * row_sq)
        if c > 1.0:
            return 1.0
        if c < -1.0:
            return -1.0
        return c

    @numba.njit(cache=True)
    def cosine_scores_numba(q, q_sq, mat, mat_sq):
        n = mat.shape[0]
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            out[i] = _cos_row(q, q_sq, mat, i, mat_sq[i])
        return out

    @numba.njit(cache=True)
    def founder_scores_numba(q_desc, q_desc_sq, q_jobs, q_jobs_sq, q_deg, q_top, q_mask,
                             desc, desc_sq, jobs, jobs_sq, degs, tops, masks):
        n = desc.shape[0]
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            cd = _cos_row(q_desc, q_desc_sq, desc, i, desc_sq[i])
            cj = _cos_row(q_jobs, q_jobs_sq, jobs, i, jobs_sq[i])
            m = masks[i] & q_mask
            shared = 0
            while m:
                shared += m & 1
                m >>= 1
            d_deg = abs(float(degs[i]) - float(q_deg))
            d_top = abs(float(tops[i]) - float(q_top))
            out[i] = -(d_deg / 12.0) + cd + cj + shared / 5.0 - d_top / 20.0
        return out
else:  # pragma: no cover
    cosine_scores_numba = None
    founder_scores_numba = None


def _select() -> str:
    choice = os.environ.get("FOUNDERFIT_KERNELS", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"FOUNDERFIT_KERNELS must be auto, numba or numpy, got {choice!r}")
    if choice == "numpy" or not HAS_NUMBA:
        return "numpy"
    return "numba"


BACKEND = _select()

if BACKEND == "numba":
    founder_scores = founder_scores_numba
    cosine_scores = cosine_scores_numba
else:
    founder_scores = founder_scores_numpy
    cosine_scores = cosine_scores_numpy


def implementations() -> dict[str, tuple]:
    """Available (founder_scores, cosine_scores) pairs keyed by backend name."""
    impls = {"numpy": (founder_scores_numpy, cosine_scores_numpy)}
    if HAS_NUMBA:
        impls["numba"] = (founder_scores_numba, cosine_scores_numba)
    return impls
