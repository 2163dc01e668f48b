"""Compiled single-site heat-bath kernels.

Fields live on a flattened ``(L+2) x (L+2)`` grid whose outer ring holds the
boundary condition.  Every step consumes one row ``(r_site, u)`` of a
``draws`` array: the site is ``int(r_site * n_sites)`` and the new height is
the inverse-CDF image of ``u``.  Feeding identical draws to several grids
gives the grand monotone coupling.
"""

import numpy as np
from numba import njit

_BUF = 1 << 14


@njit(cache=True, inline="always")
def _pw(d, p, ip):
    d = abs(d)
    if ip == 1:
        return d
    if ip == 2:
        return d * d
    if ip == 3:
        return d * d * d
    return d ** p


@njit(cache=True)
def _bounds(n0, n1, n2, n3, mode, n_plus, W, lo_pin):
    if mode == 2:
        lo, hi = 0, n_plus
    else:
        mx = max(max(n0, n1), max(n2, n3))
        if mode == 1:
            lo = 0
            hi = max(mx, 0) + W
        else:
            mn = min(min(n0, n1), min(n2, n3))
            lo = mn - W
            hi = mx + W
    if lo_pin > lo:
        lo = lo_pin
    return lo, hi


@njit(cache=True)
def _weights(g, pos, S, w, p, ip, beta, mode, n_plus, W, lo_pin, buf):
    """Fill ``buf`` with max-shifted heat-bath weights; returns (lo, count, total)."""
    n0 = g[pos + S]
    n1 = g[pos - S]
    n2 = g[pos + 1]
    n3 = g[pos - 1]
    lo, hi = _bounds(n0, n1, n2, n3, mode, n_plus, W, lo_pin)
    m = hi - lo + 1
    if m > buf.shape[0]:
        raise ValueError("heat-bath support exceeds the kernel buffer")
    emin = 1e300
    for k in range(m):
        h = lo + k
        e = (w[0] * _pw(float(h - n0), p, ip) + w[1] * _pw(float(h - n1), p, ip)
             + w[2] * _pw(float(h - n2), p, ip) + w[3] * _pw(float(h - n3), p, ip))
        buf[k] = e
        if e < emin:
            emin = e
    total = 0.0
    for k in range(m):
        buf[k] = np.exp(-beta * (buf[k] - emin))
        total += buf[k]
    return lo, m, total


@njit(cache=True)
def _draw(buf, lo, m, total, u):
    target = u * total
    cum = 0.0
    for k in range(m):
        cum += buf[k]
        if cum > target:
            return lo + k
    return lo + m - 1


@njit(cache=True)
def new_height(g, pos, S, w, p, ip, beta, mode, n_plus, W, u):
    buf = np.empty(_BUF)
    lo, m, total = _weights(g, pos, S, w, p, ip, beta, mode, n_plus, W, -(1 << 60), buf)
    return _draw(buf, lo, m, total, u)


@njit(cache=True)
def run_steps(g, sites, S, nbw, p, ip, beta, mode, n_plus, W, draws):
    n = sites.shape[0]
    buf = np.empty(_BUF)
    none = -(1 << 60)
    for t in range(draws.shape[0]):
        k = int(draws[t, 0] * n)
        pos = sites[k]
        lo, m, total = _weights(g, pos, S, nbw[k], p, ip, beta, mode, n_plus, W, none, buf)
        g[pos] = _draw(buf, lo, m, total, draws[t, 1])


@njit(cache=True)
def run_coupled(G, sites, S, nbw, p, ip, beta, mode, n_plus, W, draws, check):
    """Advance replicas ``G[r]`` with shared draws.

    With ``check`` set, returns the number of steps after which some adjacent
    pair ``G[r] <= G[r+1]`` fails at the updated site, and the first such step
    (or -1).
    """
    n = sites.shape[0]
    R = G.shape[0]
    buf = np.empty(_BUF)
    none = -(1 << 60)
    violations = 0
    first = -1
    for t in range(draws.shape[0]):
        k = int(draws[t, 0] * n)
        pos = sites[k]
        for r in range(R):
            lo, m, total = _weights(G[r], pos, S, nbw[k], p, ip, beta, mode, n_plus, W, none, buf)
            G[r, pos] = _draw(buf, lo, m, total, draws[t, 1])
        if check:
            for r in range(R - 1):
                if G[r, pos] > G[r + 1, pos]:
                    violations += 1
                    if first < 0:
                        first = t
                    break
    return violations, first


@njit(cache=True)
def run_occupation(g, sites, S, nbw, p, ip, beta, mode, n_plus, W, draws, radix, idx, counts):
    """Run steps while counting visits to each mixed-radix state index.

    Heights must lie in ``0..n_plus``; ``radix[k]`` is the place value of site k.
    Returns the final index.
    """
    n = sites.shape[0]
    buf = np.empty(_BUF)
    none = -(1 << 60)
    for t in range(draws.shape[0]):
        k = int(draws[t, 0] * n)
        pos = sites[k]
        lo, m, total = _weights(g, pos, S, nbw[k], p, ip, beta, mode, n_plus, W, none, buf)
        h = _draw(buf, lo, m, total, draws[t, 1])
        idx += (h - g[pos]) * radix[k]
        g[pos] = h
        counts[idx] += 1
    return idx


@njit(cache=True)
def run_until_count(g, sites, S, nbw, p, ip, beta, mode, n_plus, W, draws, level, needed, count):
    """Run until at least ``needed`` sites sit at height >= ``level``.

    Returns ``(steps_taken, count)``; ``steps_taken`` is -1 when the draws ran
    out first.  The predicate is checked after every step.
    """
    n = sites.shape[0]
    buf = np.empty(_BUF)
    none = -(1 << 60)
    for t in range(draws.shape[0]):
        k = int(draws[t, 0] * n)
        pos = sites[k]
        lo, m, total = _weights(g, pos, S, nbw[k], p, ip, beta, mode, n_plus, W, none, buf)
        h = _draw(buf, lo, m, total, draws[t, 1])
        if h >= level and g[pos] < level:
            count += 1
        elif h < level and g[pos] >= level:
            count -= 1
        g[pos] = h
        if count >= needed:
            return t + 1, count
    return -1, count


@njit(cache=True)
def run_pinned_ratio(g, sites, S, nbw, p, ip, beta, mode, n_plus, W, draws, pin_k, pin_lo, thr, every, out):
    """Chain with site ``pin_k`` held at height >= ``pin_lo``.

    Every ``every`` steps records the exact conditional probability that the
    pinned site is >= ``thr`` given its neighbours and the pin (a
    Rao-Blackwellized estimate of one tail ratio).  Returns the number of
    records written.
    """
    n = sites.shape[0]
    buf = np.empty(_BUF)
    none = -(1 << 60)
    ppos = sites[pin_k]
    j = 0
    for t in range(draws.shape[0]):
        k = int(draws[t, 0] * n)
        pos = sites[k]
        lo_pin = pin_lo if k == pin_k else none
        lo, m, total = _weights(g, pos, S, nbw[k], p, ip, beta, mode, n_plus, W, lo_pin, buf)
        g[pos] = _draw(buf, lo, m, total, draws[t, 1])
        if (t + 1) % every == 0 and j < out.shape[0]:
            lo, m, total = _weights(g, ppos, S, nbw[pin_k], p, ip, beta, mode, n_plus, W, pin_lo, buf)
            upper = 0.0
            for q in range(max(thr - lo, 0), m):
                upper += buf[q]
            out[j] = upper / total
            j += 1
    return j
