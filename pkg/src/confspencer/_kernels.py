"""Hot loops for jet multiplication.

Two interchangeable backends: a numba-compiled loop and a pure numpy
gather/matmul.  Set ``CONFSPENCER_NO_NUMBA=1`` to force numpy.
"""
import os

import numpy as np

_FORCE_NUMPY = os.environ.get("CONFSPENCER_NO_NUMBA", "").strip() not in ("", "0")

try:
    if _FORCE_NUMPY:
        raise ImportError("numba disabled by environment")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _mul_numpy(a, b, pi, pj, scatter):
    # a, b: (m, ncoef); scatter: (npairs, ncoef) 0/1 matrix
    return (a[:, pi] * b[:, pj]) @ scatter


if HAVE_NUMBA:

    @njit(cache=True)
    def _mul_loop(a, b, pi, pj, pk, ncoef):
        m = a.shape[0]
        out = np.zeros((m, ncoef))
        for r in range(m):
            for p in range(pi.shape[0]):
                out[r, pk[p]] += a[r, pi[p]] * b[r, pj[p]]
        return out


def backend():
    return "numba" if HAVE_NUMBA else "numpy"


def jet_mul(a, b, table, use_numba=None):
    """Truncated product of two stacks of jets, shape (m, ncoef)."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba and HAVE_NUMBA:
        return _mul_loop(
            np.ascontiguousarray(a, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64),
            table.pi, table.pj, table.pk, table.ncoef,
        )
    return _mul_numpy(a, b, table.pi, table.pj, table.scatter)
