"""Hot numeric kernels for the EM pass, with a numba and a numpy path.

The jitted path is used whenever numba imports cleanly; set
REACTMAP_NO_NUMBA=1 to force the pure-numpy fallback. Both paths share
the same source, so results agree to floating-point accumulation order.
benchmarks/bench_em.py compares the two.
"""

import os

import numpy as np

_DISABLED = os.environ.get("REACTMAP_NO_NUMBA", "").lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("numba disabled via REACTMAP_NO_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    njit = None
    NUMBA_ENABLED = False


def _e_step_core(X, v_fg, v_bg, log_a_fg, log_a_bg, sigma):
    # X is (n, d) pixel features; returns z_fg of length n.
    n = X.shape[0]
    z = np.empty(n)
    for i in range(n):
        l_fg = np.dot(X[i], v_fg) / sigma + log_a_fg
        l_bg = np.dot(X[i], v_bg) / sigma + log_a_bg
        m = max(l_fg, l_bg)
        e_fg = np.exp(l_fg - m)
        e_bg = np.exp(l_bg - m)
        z[i] = e_fg / (e_fg + e_bg)
    return z


def _log_likelihood_core(X, v_fg, v_bg, log_a_fg, log_a_bg, sigma):
    n = X.shape[0]
    total = 0.0
    for i in range(n):
        l_fg = np.dot(X[i], v_fg) / sigma + log_a_fg
        l_bg = np.dot(X[i], v_bg) / sigma + log_a_bg
        m = max(l_fg, l_bg)
        total += m + np.log(np.exp(l_fg - m) + np.exp(l_bg - m))
    return total


def _m_step_core(X, z_fg):
    n, d = X.shape
    s_fg = 0.0
    v_fg = np.zeros(d)
    v_bg = np.zeros(d)
    for i in range(n):
        w = z_fg[i]
        s_fg += w
        for k in range(d):
            v_fg[k] += w * X[i, k]
            v_bg[k] += (1.0 - w) * X[i, k]
    s_bg = n - s_fg
    return v_fg, v_bg, s_fg, s_bg


def _e_step_np(X, v_fg, v_bg, log_a_fg, log_a_bg, sigma):
    l_fg = X @ v_fg / sigma + log_a_fg
    l_bg = X @ v_bg / sigma + log_a_bg
    m = np.maximum(l_fg, l_bg)
    e_fg = np.exp(l_fg - m)
    e_bg = np.exp(l_bg - m)
    return e_fg / (e_fg + e_bg)


def _log_likelihood_np(X, v_fg, v_bg, log_a_fg, log_a_bg, sigma):
    l_fg = X @ v_fg / sigma + log_a_fg
    l_bg = X @ v_bg / sigma + log_a_bg
    return float(np.logaddexp(l_fg, l_bg).sum())


def _m_step_np(X, z_fg):
    s_fg = float(z_fg.sum())
    v_fg = X.T @ z_fg
    v_bg = X.sum(axis=0) - v_fg
    return v_fg, v_bg, s_fg, X.shape[0] - s_fg


if NUMBA_ENABLED:
    e_step_core = njit(cache=True, fastmath=False)(_e_step_core)
    log_likelihood_core = njit(cache=True, fastmath=False)(_log_likelihood_core)
    m_step_core = njit(cache=True, fastmath=False)(_m_step_core)
else:
    e_step_core = _e_step_np
    log_likelihood_core = _log_likelihood_np
    m_step_core = _m_step_np


def warmup():
    """Trigger jit compilation on tiny inputs so later timings are clean."""
    X = np.ones((2, 3))
    z = np.full(2, 0.5)
    e_step_core(X, X[0], X[1], -0.7, -0.7, 8.0)
    log_likelihood_core(X, X[0], X[1], -0.7, -0.7, 8.0)
    m_step_core(X, z)
