"""Pure-numpy fallback for the compiled kernels.

Sequential reductions are reproduced with cumulative sums, which numpy
evaluates strictly left to right.  One caveat: numpy's vectorized
`np.power` can differ from libm's correctly rounded `pow` by one ulp, so
kernels built on it (`abs_pow_sum`, `ham_power`, `dh_scale`) match the
compiled extension only to the last bit or two.  `yk_curve` carries a
bit-for-bit contract against a plain node loop, so its powers go through
`math.pow` explicitly; it is the slow path of the slow path.
"""

import math

import numpy as np

_pow = np.frompyfunc(math.pow, 2, 1)


def _libm_pow(x, e):
    return _pow(x, e).astype(np.float64)


def _seq_sum(x):
    if x.size == 0:
        return 0.0
    return float(np.cumsum(x)[-1])


def abs_pow_sum(x, q):
    """Return sum_i |x_i|**q, accumulated in index order."""
    return _seq_sum(np.power(np.abs(x), q))


def count_above(x, k):
    """Return #{i : x_i > k} (strict inequality)."""
    return int(np.count_nonzero(x > k))


def grad_norm_sq(p):
    """Return s_i = sum_j p[j, i]**2 for a (d, n) stack of gradient components."""
    out = p[0] * p[0]
    for j in range(1, p.shape[0]):
        out = out + p[j] * p[j]
    return out


def ham_power(s, gamma, c1):
    """Return c1 * s**(gamma/2) elementwise."""
    return c1 * np.power(s, 0.5 * gamma)


def dh_scale(s, gamma, c1):
    """Return c1*gamma*s**((gamma-2)/2) with the value 0 at s = 0."""
    e = 0.5 * (gamma - 2.0)
    with np.errstate(divide="ignore"):
        vals = (c1 * gamma) * np.power(s, e)
    return np.where(s > 0.0, vals, 0.0)


def yk_curve(s, kgrid, delta, expo):
    """Superlevel functional sums for an ascending k-grid; see the compiled twin."""
    half = 0.5 * (1.0 + delta)
    texp = 2.0 / (1.0 + delta)
    onps = 1.0 + s
    v = _libm_pow(onps, half)
    nk = kgrid.shape[0]
    y = np.zeros(nk)
    cnt = np.zeros(nk, dtype=np.int64)
    for j in range(nk):
        k = kgrid[j]
        excess = np.where(v > k, v - k, 0.0)
        y[j] = _seq_sum(_libm_pow(excess, expo))
        cnt[j] = np.count_nonzero(onps > math.pow(k, texp))
    return y, cnt
