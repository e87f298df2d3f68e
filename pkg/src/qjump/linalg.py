"""Dense matrix exponential by scaling and squaring.

Diagonal [13/13] Pade approximant with the 1-norm threshold of
Higham (2005).  Used only by the small verification oracle, so the
lower-degree shortcuts of the full algorithm are omitted.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["expm"]

_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def expm(a: np.ndarray) -> np.ndarray:
    """Return ``exp(a)`` for a square real or complex matrix."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expm expects a square matrix")
    if not np.issubdtype(a.dtype, np.inexact):
        a = a.astype(float)
    n = a.shape[0]
    ident = np.eye(n, dtype=a.dtype)
    norm = np.abs(a).sum(axis=0).max() if n else 0.0
    if norm == 0.0:
        return ident.copy()

    s = max(0, math.ceil(math.log2(norm / _THETA13)))
    a = a / 2.0 ** s

    b = _PADE13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)

    for _ in range(s):
        r = r @ r
    return r
