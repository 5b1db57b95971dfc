"""Small dense linear-algebra helpers shared by the precoder and decoders.

Rank decisions use a singular-value threshold relative to the largest
singular value; all matrices here are at most a few dozen rows wide.
"""

from __future__ import annotations

import numpy as np

RANK_RTOL = 1e-9

__all__ = ["RANK_RTOL", "rank", "row_coefficients", "left_null_space", "unit_columns"]


def rank(a, rtol: float = RANK_RTOL) -> int:
    a = np.atleast_2d(np.asarray(a))
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def row_coefficients(row, basis):
    """Least-squares coefficients ``c`` with ``c @ basis ~= row``.

    Returns ``(c, rel_residual)`` where the residual is
    ``||c @ basis - row|| / ||row||`` (zero for a zero row).
    """
    row = np.asarray(row)
    basis = np.atleast_2d(np.asarray(basis))
    c, *_ = np.linalg.lstsq(basis.T, row, rcond=None)
    norm = np.linalg.norm(row)
    if norm == 0.0:
        return c, 0.0
    return c, float(np.linalg.norm(c @ basis - row) / norm)


def left_null_space(a, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal ``U`` (columns) with ``U^H a = 0``."""
    a = np.atleast_2d(np.asarray(a))
    u, s, _ = np.linalg.svd(a, full_matrices=True)
    r = 0 if s.size == 0 or s[0] == 0.0 else int(np.count_nonzero(s > rtol * s[0]))
    return u[:, r:]


def unit_columns(a) -> np.ndarray:
    a = np.asarray(a)
    norms = np.linalg.norm(a, axis=0)
    norms[norms == 0.0] = 1.0
    return a / norms
