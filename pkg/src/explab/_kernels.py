"""Compiled scalar kernels shared by every public entry point.

Everything that decides a classification goes through these functions, so
the library API, the renderer and the density scans agree bit-for-bit.
"""

import math

import numpy as np
from numba import njit

# Orbit status codes.
COMPLETED = 0
ESCAPED = 1
CYCLE_SUSPECTED = 2

# Newton result codes.
NEWTON_OK = 0
NEWTON_NO_CONVERGENCE = 1
NEWTON_SINGULAR = 2

# Classification tags.
TAG_UNDECIDED = 0
TAG_ATTRACTING = 1
TAG_ESCAPING = 2
TAG_CANDIDATE = 3

# Largest real part for which exp() is evaluated at all.
EVAL_LIMIT = 700.0

_jit = njit(cache=True, nogil=True)


@_jit
def step(lam, z, threshold):
    """Return (lam * exp(z), escaped); the product is formed as |lam| e^x * unit(arg)."""
    return polar_step(abs(lam), math.atan2(lam.imag, lam.real), z, threshold)


@_jit
def polar_step(lam_abs, lam_arg, z, threshold):
    """``step`` with |lam| and arg(lam) precomputed by the caller."""
    if z.real > threshold:
        return 0j, True
    mag = lam_abs * math.exp(z.real)
    if not math.isfinite(mag):
        return 0j, True
    theta = lam_arg + z.imag
    return complex(mag * math.cos(theta), mag * math.sin(theta)), False


@_jit
def _first_close_lag(ring_re, ring_im, n, zr, zi, tol2):
    """Smallest lag p with |z_n - z_{n-p}|^2 < tol2, or 0.

    The ring holds z_{n-1} .. z_{n-P} at slot index mod P; unused slots carry a
    far sentinel. The fixed-length count loop vectorizes; hits are rare.
    """
    size = ring_re.shape[0]
    cnt = 0
    for i in range(size):
        dr = zr - ring_re[i]
        di = zi - ring_im[i]
        cnt += dr * dr + di * di < tol2
    if cnt == 0:
        return 0
    for p in range(1, size + 1):
        s = (n - p) % size
        dr = zr - ring_re[s]
        di = zi - ring_im[s]
        if dr * dr + di * di < tol2:
            return p
    return 0


@_jit
def orbit_fill(lam, threshold, max_iter, tol, max_period, stop_on_cycle, out):
    """Iterate the singular orbit into ``out``.

    Returns (n_points, status, period, at_index). With ``stop_on_cycle`` false
    the first suspicion is still reported but iteration continues to the budget
    or to escape.
    """
    tol2 = tol * tol
    size = max(max_period, 1)
    ring_re = np.full(size, 1e300)
    ring_im = np.full(size, 1e300)
    if max_period < 1:
        tol2 = -1.0
    out[0] = 0j
    ring_re[0] = 0.0
    ring_im[0] = 0.0
    status = COMPLETED
    period = 0
    at_index = 0
    lam_abs = abs(lam)
    lam_arg = math.atan2(lam.imag, lam.real)
    n = 1
    while n <= max_iter:
        z, esc = polar_step(lam_abs, lam_arg, out[n - 1], threshold)
        if esc:
            # only reachable on magnitude overflow; the previous point is the last finite one
            return n, ESCAPED, period, n - 1
        out[n] = z
        if z.real > threshold:
            return n + 1, ESCAPED, period, n
        if status == COMPLETED:
            p = _first_close_lag(ring_re, ring_im, n, z.real, z.imag, tol2)
            if p > 0:
                status = CYCLE_SUSPECTED
                period = p
                at_index = n
                if stop_on_cycle:
                    return n + 1, status, period, at_index
        ring_re[n % size] = z.real
        ring_im[n % size] = z.imag
        n += 1
    return n, status, period, at_index


@_jit
def iterate_with_derivative(lam, z, p):
    """Return (f^p(z), log|Df^p(z)|, arg Df^p(z), ok).

    Uses f' = f, so the derivative is the product of the next p orbit points.
    """
    log_mag = 0.0
    arg = 0.0
    w = z
    for _ in range(p):
        w, esc = step(lam, w, EVAL_LIMIT)
        if esc:
            return w, 0.0, 0.0, False
        a = abs(w)
        if a == 0.0:
            log_mag = -math.inf
        else:
            log_mag += math.log(a)
            arg += math.atan2(w.imag, w.real)
    return w, log_mag, arg, True


@_jit
def _from_log(log_mag, arg):
    if log_mag < -745.0:
        return 0j
    m = math.exp(min(log_mag, 709.0))
    return complex(m * math.cos(arg), m * math.sin(arg))


@_jit
def newton_cycle(lam, z0, p, tol, max_iter):
    """Newton on F(z) = f^p(z) - z.

    Returns (z, multiplier, residual, code, iterations).
    """
    z = z0
    for it in range(max_iter + 1):
        w, log_mag, arg, ok = iterate_with_derivative(lam, z, p)
        if not ok:
            return z, 0j, math.inf, NEWTON_NO_CONVERGENCE, it
        F = w - z
        res = abs(F)
        mult = _from_log(log_mag, arg)
        if res < tol:
            return z, mult, res, NEWTON_OK, it
        if it == max_iter:
            break
        if log_mag > 30.0:
            # F' = Df - 1 ~ Df; divide in log form to stay finite
            corr = F * _from_log(-log_mag, -arg) / (1.0 - _from_log(-log_mag, -arg))
        else:
            dF = mult - 1.0
            if abs(dF) < 1e-14:
                return z, mult, res, NEWTON_SINGULAR, it
            corr = F / dF
        z = z - corr
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            return z0, 0j, math.inf, NEWTON_NO_CONVERGENCE, it
    return z, 0j, math.inf, NEWTON_NO_CONVERGENCE, max_iter


@_jit
def reduce_period(lam, z, p, tol, max_iter):
    """Re-refine at the smallest divisor q of p that z already (nearly) repeats with."""
    for q in range(1, p):
        if p % q != 0:
            continue
        w, _, _, ok = iterate_with_derivative(lam, z, q)
        if not ok:
            continue
        if abs(w - z) < 1e-6 * max(1.0, abs(z)):
            z2, m2, r2, code, _ = newton_cycle(lam, z, q, tol, max_iter)
            if code == NEWTON_OK:
                return z2, m2, r2, q, True
    return z, 0j, 0.0, p, False


@_jit
def refine_suspect(lam, z0, p, tol, max_iter):
    """Newton from a suspect point followed by minimal-period reduction.

    Returns (period, point, multiplier, residual, code).
    """
    z, mult, res, code, _ = newton_cycle(lam, z0, p, tol, max_iter)
    if code != NEWTON_OK:
        return p, z, mult, res, code
    z2, m2, r2, q, reduced = reduce_period(lam, z, p, tol, max_iter)
    if reduced:
        return q, z2, m2, r2, NEWTON_OK
    return p, z, mult, res, code


@_jit
def classify_one(lam, threshold, budget, delta, cycle_tol, max_period,
                 refine_tol, margin, newton_iter, buf, ann_lo, ann_hi):
    """Full budgeted classification of one parameter.

    Returns (tag, period, point, multiplier, residual, escape_index,
    violated_at, annulus_hit, n_points). violated_at is 0 when the
    disk condition holds.
    """
    n_pts, status, period, at_index = orbit_fill(
        lam, threshold, budget, cycle_tol, max_period, True, buf)
    violated = 0
    hit = False
    d2 = delta * delta
    lo2 = ann_lo * ann_lo
    hi2 = ann_hi * ann_hi
    for k in range(1, n_pts):
        z = buf[k]
        r2 = z.real * z.real + z.imag * z.imag
        if violated == 0 and r2 < d2:
            violated = k
        if lo2 <= r2 < hi2:
            hit = True
    point = 0j
    mult = 0j
    res = math.inf
    if status == CYCLE_SUSPECTED:
        q, zc, mc, rc, code = refine_suspect(
            lam, buf[n_pts - 1], period, refine_tol, newton_iter)
        if code == NEWTON_OK and rc < refine_tol and abs(mc) < 1.0 - margin:
            return (TAG_ATTRACTING, q, zc, mc, rc, 0, violated, hit, n_pts)
    if status == ESCAPED:
        return (TAG_ESCAPING, 0, point, mult, res, at_index, violated, hit, n_pts)
    if violated == 0:
        return (TAG_CANDIDATE, 0, point, mult, res, 0, violated, hit, n_pts)
    return (TAG_UNDECIDED, 0, point, mult, res, 0, violated, hit, n_pts)


@_jit
def classify_many(lams, threshold, budget, delta, cycle_tol, max_period,
                  refine_tol, margin, newton_iter, ann_lo, ann_hi,
                  tags, periods, escape_idx, hits):
    buf = np.empty(budget + 2, dtype=np.complex128)
    for i in range(lams.shape[0]):
        lam = lams[i]
        if lam == 0:
            tags[i] = TAG_UNDECIDED
            periods[i] = 0
            escape_idx[i] = 0
            hits[i] = False
            continue
        r = classify_one(lam, threshold, budget, delta, cycle_tol, max_period,
                         refine_tol, margin, newton_iter, buf, ann_lo, ann_hi)
        tags[i] = r[0]
        periods[i] = r[1]
        escape_idx[i] = r[5]
        hits[i] = r[7]
