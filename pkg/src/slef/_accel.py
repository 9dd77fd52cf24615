"""Hot inner loops with a numba path and a pure-numpy fallback.

Each kernel exists twice: ``*_numpy`` (always available) and ``*_numba``
(compiled with ``@njit`` when numba imports). The public names bind to the
numba versions unless numba is missing or the environment variable
``SLEF_DISABLE_NUMBA`` is set to a non-empty value other than ``0``.
The flag is read once, at import time.

Both paths are deterministic. They are not bit-identical to each other
(the numba moment kernel uses compensated sequential summation, numpy uses
pairwise summation) but agree to rounding.
"""

import math
import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_flag = os.environ.get("SLEF_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _flag not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by SLEF_DISABLE_NUMBA")
    from numba import njit
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA
BACKEND = "numba" if USE_NUMBA else "numpy"


# -- numpy implementations ---------------------------------------------------

def convolve_valid_numpy(padded, kernel):
    """'Valid' 2D convolution of a real image with a complex kernel."""
    windows = sliding_window_view(padded, kernel.shape)
    return np.einsum("ijkl,kl->ij", windows, kernel[::-1, ::-1], optimize=True)


def wta_update_numpy(best_mag, best_resp, best_idx, resp, k):
    """Fold filter ``k`` into the running winner-take-all state in place.

    Strict comparison keeps the earlier (lower) filter index on ties.
    Magnitudes use ``hypot`` in both paths so winners agree bit for bit.
    """
    mag = np.hypot(resp.real, resp.imag)
    better = mag > best_mag
    best_mag[better] = mag[better]
    best_resp[better] = resp[better]
    best_idx[better] = k


def ellipse_moments_numpy(x, y, w):
    """Weighted moments ``[sum w x^4, sum w x^2 y^2, sum w y^4, sum w x^2, sum w y^2]``."""
    x2 = x * x
    y2 = y * y
    wx2 = w * x2
    wy2 = w * y2
    return np.array([
        np.sum(wx2 * x2),
        np.sum(wx2 * y2),
        np.sum(wy2 * y2),
        np.sum(wx2),
        np.sum(wy2),
    ])


def leclerc_weights_numpy(x, y, theta1, theta2, c):
    """Weights ``exp(-c (theta1 x^2 + theta2 y^2 - 1)^2)``."""
    z = theta1 * x * x + theta2 * y * y - 1.0
    return np.exp(-c * z * z)


# -- numba implementations ---------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def convolve_valid_numba(padded, kernel):
        kh, kw = kernel.shape
        oh = padded.shape[0] - kh + 1
        ow = padded.shape[1] - kw + 1
        out = np.empty((oh, ow), dtype=np.complex128)
        flipped = kernel[::-1, ::-1].copy()
        for i in range(oh):
            for j in range(ow):
                acc_re = 0.0
                acc_im = 0.0
                for a in range(kh):
                    for b in range(kw):
                        v = padded[i + a, j + b]
                        t = flipped[a, b]
                        acc_re += v * t.real
                        acc_im += v * t.imag
                out[i, j] = complex(acc_re, acc_im)
        return out

    @njit(cache=True)
    def wta_update_numba(best_mag, best_resp, best_idx, resp, k):
        h, w = resp.shape
        for i in range(h):
            for j in range(w):
                r = resp[i, j]
                m = math.hypot(r.real, r.imag)
                if m > best_mag[i, j]:
                    best_mag[i, j] = m
                    best_resp[i, j] = r
                    best_idx[i, j] = k

    @njit(cache=True)
    def ellipse_moments_numba(x, y, w):
        # Neumaier-compensated running sums, fixed sequential order.
        s = np.zeros(5)
        comp = np.zeros(5)
        terms = np.empty(5)
        for i in range(x.shape[0]):
            x2 = x[i] * x[i]
            y2 = y[i] * y[i]
            wx2 = w[i] * x2
            wy2 = w[i] * y2
            terms[0] = wx2 * x2
            terms[1] = wx2 * y2
            terms[2] = wy2 * y2
            terms[3] = wx2
            terms[4] = wy2
            for k in range(5):
                t = s[k] + terms[k]
                if abs(s[k]) >= abs(terms[k]):
                    comp[k] += (s[k] - t) + terms[k]
                else:
                    comp[k] += (terms[k] - t) + s[k]
                s[k] = t
        return s + comp

    @njit(cache=True)
    def leclerc_weights_numba(x, y, theta1, theta2, c):
        out = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            z = theta1 * x[i] * x[i] + theta2 * y[i] * y[i] - 1.0
            out[i] = np.exp(-c * z * z)
        return out

else:  # pragma: no cover - exercised only without numba
    convolve_valid_numba = None
    wta_update_numba = None
    ellipse_moments_numba = None
    leclerc_weights_numba = None


if USE_NUMBA:
    convolve_valid = convolve_valid_numba
    wta_update = wta_update_numba
    ellipse_moments = ellipse_moments_numba
    leclerc_weights = leclerc_weights_numba
else:
    convolve_valid = convolve_valid_numpy
    wta_update = wta_update_numpy
    ellipse_moments = ellipse_moments_numpy
    leclerc_weights = leclerc_weights_numpy
