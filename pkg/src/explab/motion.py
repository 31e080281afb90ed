"""Holomorphic motion of orbit points and the distortion experiments.

A point z on the forward orbit of 0 under lam0 is moved to lam1 by
iterating z forward ``depth`` times under lam0 and pulling the endpoint back
under lam1 along inverse branches chosen nearest to the lam0 orbit. The
parameter segment is split into homotopy sub-steps; each sub-step uses the
previous pulled-back orbit as its branch reference.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from explab import _kernels as K
from explab.derivatives import ScaledComplex, ledger_from_record, param_derivative
from explab.orbit import TWO_PI, EscapePolicy, Param, full_orbit

BRANCH_GAP_MIN = 1e-3
PERIODIC_TOL = 1e-9
TRACK_MAX_PERIOD = 64
BOUNDARY_SAMPLES = 64


class BranchAmbiguity(RuntimeError):
    pass


class EscapeDuringTracking(RuntimeError):
    pass


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class MotionTrack:
    lambda0: Param
    lambda1: Param
    base_point: complex
    tracked_point: complex
    pullback_depth: int
    homotopy_steps: int
    conjugacy_residual: float
    # final pulled-back orbit u_0 .. u_depth under lambda1
    chain: tuple[complex, ...] = field(repr=False, default=())

    def to_json(self) -> dict:
        return {
            "lambda0": [self.lambda0.value.real, self.lambda0.value.imag],
            "lambda1": [self.lambda1.value.real, self.lambda1.value.imag],
            "base_point": [self.base_point.real, self.base_point.imag],
            "tracked_point": [self.tracked_point.real, self.tracked_point.imag],
            "pullback_depth": self.pullback_depth,
            "homotopy_steps": self.homotopy_steps,
            "conjugacy_residual": self.conjugacy_residual,
            "chain": [[z.real, z.imag] for z in self.chain],
        }


def _forward(lam: Param, z: complex, depth: int, threshold: float) -> list[complex]:
    """z, f(z), ..., f^depth(z); a detected cycle is repeated exactly instead of iterated."""
    orbit = [z]
    for k in range(depth):
        w, esc = K.step(lam.value, orbit[-1], threshold)
        if esc:
            raise EscapeDuringTracking(f"orbit of {z} passes Re > {threshold} at step {k}")
        if k < TRACK_MAX_PERIOD and abs(w - z) < PERIODIC_TOL * max(1.0, abs(z)):
            p = k + 1
            return [orbit[i % p] for i in range(depth + 1)]
        orbit.append(w)
    return orbit


def _pull(lam: Param, w: complex, ref: complex) -> complex:
    """Preimage of w nearest ref, refusing when the runner-up branch is about as near."""
    if w == 0:
        raise EscapeDuringTracking("pullback reached the omitted value 0")
    base = complex(math.log(abs(w)) - lam.log_abs, math.atan2(w.imag, w.real) - lam.arg)
    t = (ref.imag - base.imag) / TWO_PI
    k = math.ceil(t - 0.5)
    best = complex(base.real, base.imag + TWO_PI * k)
    d1 = abs(best - ref)
    d2 = min(abs(complex(base.real, base.imag + TWO_PI * (k + j)) - ref) for j in (-1, 1))
    if d2 - d1 < BRANCH_GAP_MIN:
        raise BranchAmbiguity(f"two inverse branches within {BRANCH_GAP_MIN} of the reference {ref}")
    return best


def _pullback_orbit(lam: Param, end: complex, refs: list[complex]) -> list[complex]:
    depth = len(refs) - 1
    out = [0j] * (depth + 1)
    out[depth] = end
    for k in range(depth - 1, -1, -1):
        out[k] = _pull(lam, out[k + 1], refs[k])
    return out


def track_point(lambda0: Param | complex, lambda1: Param | complex, z: complex,
                depth: int = 30, steps: int = 8, policy: EscapePolicy | None = None
                ) -> MotionTrack:
    """h_{lambda1}(z) = lim g_{lambda1}^{-n}(g_{lambda0}^n(z)), truncated at ``depth``."""
    lam0 = Param.coerce(lambda0)
    lam1 = Param.coerce(lambda1)
    z = complex(z)
    if depth < 1 or steps < 1:
        raise ValueError("depth and steps must be >= 1")
    if abs(z) < 1e-12:
        raise ValueError("base point 0 is the singular value; use orbit points of index >= 1")
    threshold = (policy or EscapePolicy()).re_threshold
    refs = _forward(lam0, z, depth, threshold)
    end = refs[-1]
    if lam1 == lam0:
        return MotionTrack(lam0, lam1, z, z, depth, steps, 0.0, tuple(refs))
    for s in range(1, steps + 1):
        lam_s = Param(lam0.value + (lam1.value - lam0.value) * (s / steps))
        refs = _pullback_orbit(lam_s, end, refs)
    h = refs[0]
    residual = abs(refs[1] - K.step(lam1.value, h, K.EVAL_LIMIT)[0])
    return MotionTrack(lam0, lam1, z, h, depth, steps, residual, tuple(refs))


def verify_conjugacy(track: MotionTrack) -> float:
    """|h(g_{lambda0}(z)) - g_{lambda1}(h(z))| with independent tracks of z and g_{lambda0}(z)."""
    if track.lambda0 == track.lambda1:
        return 0.0
    gz, esc = K.step(track.lambda0.value, track.base_point, K.EVAL_LIMIT)
    if esc:
        raise EscapeDuringTracking("image of the base point is not representable")
    t_img = track_point(track.lambda0, track.lambda1, gz, track.pullback_depth,
                        track.homotopy_steps)
    t_z = track_point(track.lambda0, track.lambda1, track.base_point, track.pullback_depth,
                      track.homotopy_steps)
    g_h, _ = K.step(track.lambda1.value, t_z.tracked_point, K.EVAL_LIMIT)
    return abs(t_img.tracked_point - g_h)


@dataclass(frozen=True)
class DistortionStats:
    radius: float
    n_used: int
    sup_ratio_dev: float
    affine_constant_lo: float
    affine_constant_hi: float
    pairs_sampled: int
    pairs_excluded: int = 0
    n: int = 0
    delta: float = 0.0

    def to_json(self) -> dict:
        def f(x):
            return None if math.isnan(x) else x
        return {
            "radius": self.radius, "n": self.n, "n_used": self.n_used,
            "sup_ratio_dev": f(self.sup_ratio_dev),
            "affine_constant_lo": f(self.affine_constant_lo),
            "affine_constant_hi": f(self.affine_constant_hi),
            "pairs_sampled": self.pairs_sampled, "pairs_excluded": self.pairs_excluded,
            "delta": self.delta,
        }


DISTORTION_COLUMNS = ("radius", "n", "n_used", "sup_ratio_dev", "affine_constant_lo",
                      "affine_constant_hi", "pairs_sampled", "pairs_excluded", "delta")


def write_distortion_csv(stats: list[DistortionStats], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DISTORTION_COLUMNS)
        for s in stats:
            w.writerow([repr(getattr(s, c)) for c in DISTORTION_COLUMNS])


def _disk_points(rng: np.random.Generator, center: complex, r: float, count: int) -> np.ndarray:
    out = np.empty(count, np.complex128)
    i = 0
    while i < count:
        x, y = rng.uniform(-1.0, 1.0, 2)
        if x * x + y * y < 1.0:
            out[i] = center + r * complex(x, y)
            i += 1
    return out


def default_delta(lam0: Param, n: int) -> float:
    """0.1 * min(dist(orbit, 0), 1) over the truncated orbit zeta_1..zeta_n."""
    rec = full_orbit(lam0, EscapePolicy(max_iter=max(n, 1)))
    d_hat = float(np.min(np.abs(rec.points[1:]))) if len(rec) > 1 else 1.0
    return 0.1 * min(d_hat, 1.0)


def distortion_report(lambda0: Param | complex, r: float, n: int, pairs: int = 200,
                      seed: int = 0, delta: float | None = None) -> DistortionStats:
    """Sampled distortion of zeta'_n over D(lambda0, r), block length 1.

    Pairs whose orbits drift more than ``delta`` apart before time n are
    excluded and counted.
    """
    lam0 = Param.coerce(lambda0)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not r > 0:
        raise ValueError("r must be positive")
    delta = default_delta(lam0, n) if delta is None else delta
    policy = EscapePolicy(max_iter=n)
    rec0 = full_orbit(lam0, policy)
    if rec0.last_index < n - 1:
        raise ValueError(f"orbit of lambda0 escapes before time {n - 1}")
    ledger0 = ledger_from_record(rec0)
    log_d0 = ledger0[n - 1].log_mag_D  # log|Df^{n-1}_{lambda0}(0)|
    rng = np.random.default_rng(seed)
    sup_dev = 0.0
    lo, hi = math.inf, -math.inf
    used = 0
    excluded = 0
    for _ in range(pairs):
        l1, l2 = _disk_points(rng, lam0.value, r, 2)
        r1 = full_orbit(complex(l1), policy)
        r2 = full_orbit(complex(l2), policy)
        if r1.last_index < n or r2.last_index < n:
            excluded += 1
            continue
        sep = np.max(np.abs(r1.points[:n] - r2.points[:n]))
        if sep > delta:
            excluded += 1
            continue
        d1 = param_derivative(ledger_from_record(r1), n)
        d2 = param_derivative(ledger_from_record(r2), n)
        sup_dev = max(sup_dev, float(d1.relative_gap(d2)))
        diff = abs(r1[n] - r2[n])
        a = diff / (math.exp(log_d0) * abs(l1 - l2)) if diff > 0 else 0.0
        lo, hi = min(lo, float(a)), max(hi, float(a))
        used += 1
    if used == 0:
        return DistortionStats(r, 0, math.nan, math.nan, math.nan, pairs, excluded, n, delta)
    return DistortionStats(r, used, sup_dev, lo, hi, pairs, excluded, n, delta)


def time_to_scale(lambda0: Param | complex, r: float, S: float, max_iter: int = 200) -> int:
    """Smallest n with diam{zeta_n(lam) : lam on 64 points of the circle |lam - lambda0| = r} >= S."""
    lam0 = Param.coerce(lambda0)
    if not (r > 0 and S > 0):
        raise ValueError("r and S must be positive")
    ang = TWO_PI * np.arange(BOUNDARY_SAMPLES) / BOUNDARY_SAMPLES
    lams = lam0.value + r * np.exp(1j * ang)
    policy = EscapePolicy(max_iter=max_iter)
    recs = [full_orbit(complex(l), policy).points for l in lams]
    longest = max(len(p) for p in recs)
    for k in range(longest):
        pts = np.array([p[min(k, len(p) - 1)] for p in recs])
        diam = np.max(np.abs(pts[:, None] - pts[None, :]))
        if diam >= S:
            return k
    raise BudgetExceeded(f"diameter stayed below {S} for {max_iter} iterations")
