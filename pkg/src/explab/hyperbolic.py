"""Finding and certifying hyperbolic parameters near a given one.

A certificate is a chain of disk enclosures D_0 -> D_1 -> ... whose last disk
sits strictly inside the first. f^m then maps D_0 holomorphically into a
smaller disk inside itself, which forces an attracting cycle of period
dividing m. Enclosures are rigorous up to the floating-point model: the
analytic radius bound carries a 1 + 2^-40 slack and the computed center
carries an explicit rounding allowance.

Two search strategies are offered. ``scan`` classifies low-discrepancy
samples of the parameter disk and certifies the nearest attracting hit.
``route`` steers the singular orbit with parameter Newton steps onto a
waypoint of the line Im z = -arg(lam0) and then onto the line shifted by
pi i, so the next iterate lands far in the left half-plane and the one after
is essentially 0: a superattracting cycle through the singular value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from explab import _kernels as K
from explab.classify import (
    CycleInfo, ClassifySettings, DerivativeSingular, NoConvergence, TAG_NAMES,
    classify_array, classify_parameter,
)
from explab.derivatives import (
    DisagreementError, ScaledComplex, _wrap, ledger_from_record, param_derivative,
)
from explab.orbit import TWO_PI, EscapePolicy, Param, ParamError, full_orbit

SLACK = 1.0 + 2.0 ** -40
# relative rounding allowance for one computed center lam * exp(c), per unit of |theta|
ROUND_REL = 2.0 ** -51
TINY = 5e-324
TRAP_RADII = (0.1, 0.01, 0.001)
MIN_MARGIN = 1e-12
MIN_ROUTE_M = 10.0
ROUTE_MAX_N = 48
SCAN_SAMPLES = 1024
SCAN_CERTIFY_ATTEMPTS = 32


class OverflowEnclosure(ArithmeticError):
    pass


class CertificationFailure(Exception):
    """``reason`` is "NotContained" or "OverflowEnclosure"."""

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class RouteOverflow(OverflowError):
    pass


class NotFound(LookupError):
    def __init__(self, message: str, samples_tried: int):
        super().__init__(f"{message} (samples tried: {samples_tried})")
        self.samples_tried = samples_tried


@dataclass(frozen=True)
class DiskEnclosure:
    center: complex
    radius: float

    def __post_init__(self):
        c = complex(self.center)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError("disk center must be finite")
        if not (math.isfinite(self.radius) and self.radius >= 0.0):
            raise ValueError("disk radius must be finite and >= 0")

    def contains(self, z: complex) -> bool:
        return abs(complex(z) - self.center) < self.radius

    def to_json(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "radius": self.radius}


@dataclass(frozen=True)
class TrapCertificate:
    lam: Param
    period: int
    initial: DiskEnclosure
    final: DiskEnclosure
    margin: float
    chain: tuple[DiskEnclosure, ...] = field(repr=False)
    # number of map applications between chain[j] and chain[j+1]: 1, or 2 for a collapse
    steps: tuple[int, ...] = field(repr=False, default=())

    def to_json(self) -> dict:
        return {
            "lambda": [self.lam.value.real, self.lam.value.imag],
            "period": self.period,
            "initial": self.initial.to_json(),
            "final": self.final.to_json(),
            "margin": self.margin,
            "chain": [d.to_json() for d in self.chain],
            "steps": list(self.steps),
        }


def _log_expm1(x: float) -> float:
    if x <= 0.0:
        return -math.inf
    if x < 700.0:
        return math.log(math.expm1(x))
    return x + math.log1p(-math.exp(-x))


def propagate_disk(lam: Param | complex, disk: DiskEnclosure) -> DiskEnclosure:
    """Enclosure of f(D(c, rho)) by D(lam e^c, |lam| e^{Re c} (e^rho - 1)).

    The radius is computed in log form so huge rho with a far-left center
    still gives a finite (often zero-underflowing) bound.
    """
    lam = Param.coerce(lam)
    c, rho = disk.center, disk.radius
    if c.real + rho > K.EVAL_LIMIT:
        raise OverflowEnclosure(f"Re(center) + radius = {c.real + rho:.6g} > {K.EVAL_LIMIT}")
    w, _ = K.step(lam.value, c, K.EVAL_LIMIT)
    theta = lam.arg + c.imag
    rounding = ROUND_REL * abs(w) * (3.0 + abs(theta))
    if rho == 0.0:
        r = 0.0
    else:
        log_r = lam.log_abs + c.real + _log_expm1(rho)
        if log_r > 709.0:
            raise OverflowEnclosure("propagated radius is not representable")
        r = max(math.exp(log_r) * SLACK, TINY)
    return DiskEnclosure(w, r + rounding)


def collapse_disk(lam: Param | complex, disk: DiskEnclosure) -> DiskEnclosure:
    """Two-step enclosure for a disk too far right to map directly.

    If every point of D(c, rho) is sent by f into the half-plane Re w <= -X,
    then f(f(D)) lies in D(0, |lam| e^{-X}). Holds when arg(lam) + Im w stays
    within pi/2 of pi across the disk.
    """
    lam = Param.coerce(lam)
    c, rho = disk.center, disk.radius
    phi = lam.arg + c.imag
    psi = _wrap(phi) - math.pi  # phi = pi + psi (mod 2 pi)
    guard = 4.0 * 2.0 ** -52 * (abs(phi) + 4.0)
    s = abs(psi) + rho + guard
    if not s < 0.5 * math.pi:
        raise OverflowEnclosure("image of the disk is not confined to a left half-plane")
    log_x = math.log(math.cos(s)) + lam.log_abs + c.real - rho
    x = math.exp(min(log_x, 709.0)) * (1.0 - 1e-12)
    r = math.exp(lam.log_abs - x)
    r = r * SLACK if r > 0.0 else TINY
    if not math.isfinite(r):
        raise OverflowEnclosure("collapse bound is not representable")
    return DiskEnclosure(0j, r)


def certify_disk_contraction(lam: Param | complex, center: complex, m: int, rho: float
                             ) -> TrapCertificate:
    """Propagate D(center, rho) through m steps and check it lands strictly inside.

    Raises CertificationFailure("NotContained" | "OverflowEnclosure").
    """
    lam = Param.coerce(lam)
    if m < 1:
        raise ValueError("m must be >= 1")
    if not rho > 0:
        raise ValueError("rho must be positive")
    initial = DiskEnclosure(center, rho)
    chain = [initial]
    steps = []
    done = 0
    cur = initial
    while done < m:
        try:
            nxt, k = propagate_disk(lam, cur), 1
        except OverflowEnclosure as exc:
            if m - done < 2:
                raise CertificationFailure("OverflowEnclosure", str(exc)) from None
            try:
                nxt, k = collapse_disk(lam, cur), 2
            except OverflowEnclosure as exc2:
                raise CertificationFailure("OverflowEnclosure", str(exc2)) from None
        chain.append(nxt)
        steps.append(k)
        done += k
        cur = nxt
    margin = 1.0 - (abs(cur.center - initial.center) + cur.radius) / rho
    if not margin > MIN_MARGIN:
        raise CertificationFailure(
            "NotContained",
            f"final disk D({cur.center:.6g}, {cur.radius:.6g}) not inside D({center:.6g}, {rho:g})")
    return TrapCertificate(lam, m, initial, cur, margin, tuple(chain), tuple(steps))


@dataclass(frozen=True)
class TargetRoute:
    line_im: float
    M: float
    waypoints: tuple[complex, ...]
    flip_target: complex
    x0: float

    @property
    def p(self) -> int:
        return len(self.waypoints)

    def to_json(self) -> dict:
        return {
            "line_im": self.line_im,
            "M": self.M,
            "waypoints": [[z.real, z.imag] for z in self.waypoints],
            "flip_target": [self.flip_target.real, self.flip_target.imag],
            "x0": self.x0,
        }


def _line_im(lam0: Param) -> float:
    # arg taken in [0, 2 pi)
    return -_wrap(lam0.arg)


def build_route(lam0: Param | complex, x0: float, M: float = MIN_ROUTE_M) -> TargetRoute:
    """Waypoints on Im z = -arg(lam0) with Re z_{k+1} = exp(Re z_k / 2), until Re z_p >= x0."""
    lam0 = Param.coerce(lam0)
    if not M >= MIN_ROUTE_M:
        raise ValueError(f"M must be >= {MIN_ROUTE_M}")
    if M > K.EVAL_LIMIT:
        raise RouteOverflow(f"M = {M} exceeds {K.EVAL_LIMIT}")
    line_im = _line_im(lam0)
    re = float(M)
    waypoints = [complex(re, line_im)]
    while re < x0:
        re = math.exp(re / 2.0) if re / 2.0 < 709.0 else math.inf
        if re > K.EVAL_LIMIT:
            raise RouteOverflow(f"waypoint real part would exceed {K.EVAL_LIMIT} before reaching x0={x0}")
        waypoints.append(complex(re, line_im))
    flip = complex(math.exp(re / 2.0), line_im + math.pi)
    return TargetRoute(line_im, float(M), tuple(waypoints), flip, float(x0))


def _zeta(lam: complex, n: int):
    """(zeta_n, record) with evaluation allowed up to Re 700; None if not reachable."""
    rec = full_orbit(lam, EscapePolicy(re_threshold=K.EVAL_LIMIT, max_iter=n, max_period=1))
    if rec.last_index < n:
        return None, rec
    return rec[n], rec


def solve_singular_target(lam0: Param | complex, n: int, target: complex, tol: float = 1e-10,
                          max_iter: int = 50, max_step: float | None = None) -> Param:
    """Newton in the parameter for zeta_n(lam) = target.

    ``max_step`` caps |delta lam| per iteration (useful inside a homotopy).
    """
    lam = Param.coerce(lam0).value
    target = complex(target)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        try:
            return Param(target)
        except ParamError as exc:
            raise NoConvergence(str(exc)) from None
    if target == 0:
        raise NoConvergence("0 is the omitted value; zeta_n never equals 0 for n >= 2")
    for _ in range(max_iter + 1):
        z, rec = _zeta(lam, n)
        if z is None:
            raise NoConvergence(f"zeta_{n} is not evaluable at lambda={lam}")
        F = z - target
        if abs(F) < tol:
            return Param(lam)
        ledger = ledger_from_record(rec)
        if ledger.truncated_at < n:
            raise DerivativeSingular(f"zeta'_{n} underflows")
        try:
            d = param_derivative(ledger, n)
        except DisagreementError as exc:
            raise NoConvergence(str(exc)) from None
        if d.is_zero or d.log_mag < -700.0:
            raise DerivativeSingular(f"|zeta'_{n}| underflows")
        try:
            delta = (ScaledComplex.from_complex(F) / d).to_complex()
        except OverflowError:
            raise DerivativeSingular(f"Newton step for zeta_{n} overflows") from None
        if max_step is not None and abs(delta) > max_step:
            delta *= max_step / abs(delta)
        lam = lam - delta
        if not (math.isfinite(lam.real) and math.isfinite(lam.imag)) or abs(lam) < 1e-300:
            raise NoConvergence("Newton left the parameter space")
    raise NoConvergence(f"zeta_{n}(lambda) = target not solved in {max_iter} iterations")


def _steer(lam: complex, n: int, target: complex, substeps: int = 8) -> complex:
    """Homotopy: move zeta_n along a straight segment to ``target``."""
    start, _ = _zeta(lam, n)
    if start is None:
        raise NoConvergence(f"zeta_{n} not evaluable")
    scale = max(1.0, abs(target))
    for s in range(1, substeps + 1):
        t = start + (target - start) * (s / substeps)
        tol = 1e-9 * scale if s == substeps else 1e-3 * scale
        lam = solve_singular_target(lam, n, t, tol=tol, max_iter=40).value
    return lam


def _ext_iterate(lam: Param, z0: complex, p: int):
    """p steps from z0 allowing one far-right point to collapse through the left half-plane.

    Returns (points, log|Df^p(z0)|, arg Df^p(z0)); points that are not
    representable appear as None.
    """
    pts: list[complex | None] = [complex(z0)]
    log_d, arg_d = 0.0, 0.0
    z = complex(z0)
    i = 0
    while i < p:
        if z.real <= K.EVAL_LIMIT:
            w, _ = K.step(lam.value, z, K.EVAL_LIMIT)
            log_d += lam.log_abs + z.real
            arg_d += lam.arg + z.imag
            pts.append(w)
            z = w
            i += 1
            continue
        c = math.cos(lam.arg + z.imag)
        if not c < 0.0 or i + 2 > p:
            raise OverflowEnclosure(f"orbit point {z} escapes to the right")
        log_d += lam.log_abs + z.real
        x = math.exp(min(math.log(-c) + lam.log_abs + z.real, 709.0))
        if abs(lam.value) * math.exp(-x) > 0.0:
            raise OverflowEnclosure("phase of the collapsed point is not resolved")
        log_d = -math.inf
        pts.extend([None, 0j])
        z = 0j
        i += 2
    return pts, log_d, arg_d


def _ext_cycle(lam: Param, z0: complex, p: int, tol: float = 1e-11, max_iter: int = 50
               ) -> CycleInfo:
    """Newton on f^p(z) - z using the collapsing evaluation."""
    z = complex(z0)
    for _ in range(max_iter + 1):
        pts, log_d, arg_d = _ext_iterate(lam, z, p)
        F = pts[-1] - z
        mult = ScaledComplex(log_d, arg_d)
        mult_c = 0j if log_d < -745.0 else mult.to_complex()
        if abs(F) < tol:
            return CycleInfo(p, z, mult_c, abs(F))
        dF = mult_c - 1.0
        if abs(dF) < 1e-14:
            raise DerivativeSingular("Df^p - 1 vanishes")
        z = z - F / dF
    raise NoConvergence(f"period-{p} cycle through {z0} not refined")


@dataclass(frozen=True)
class HyperbolicWitness:
    lam: Param
    cycle: CycleInfo
    certificate: TrapCertificate | None
    distance_to_seed: float
    strategy: str = "scan"

    def to_json(self) -> dict:
        return {
            "lambda": [self.lam.value.real, self.lam.value.imag],
            "cycle": self.cycle.to_json(),
            "certificate": None if self.certificate is None else self.certificate.to_json(),
            "distance_to_seed": self.distance_to_seed,
            "strategy": self.strategy,
        }


def cycle_points(lam: Param, cycle: CycleInfo) -> list[complex]:
    """The representable points of the cycle, starting at ``cycle.point``."""
    pts, _, _ = _ext_iterate(lam, cycle.point, cycle.period)
    return [z for z in pts[:-1] if z is not None]


def certify_cycle(lam: Param, cycle: CycleInfo, centers: list[complex] | None = None,
                  multiples: tuple[int, ...] = (1, 2, 4)) -> TrapCertificate | None:
    """Try trap disks around each cycle point with radii 0.1, 0.01, 0.001."""
    centers = centers if centers is not None else cycle_points(lam, cycle)
    for rho in TRAP_RADII:
        for k in multiples:
            for c in centers:
                try:
                    return certify_disk_contraction(lam, c, k * cycle.period, rho)
                except CertificationFailure:
                    continue
    return None


def disk_samples(lam0: complex, r: float, count: int) -> np.ndarray:
    """Halton points mapped area-uniformly onto D(lam0, r); index 0 is lam0 itself."""
    u = qmc.Halton(d=2, scramble=False).random(count)
    rad = r * np.sqrt(u[:, 0])
    ang = TWO_PI * u[:, 1]
    return lam0 + rad * np.exp(1j * ang)


def _scan(lam0: Param, r: float, policy: EscapePolicy, samples: int, seed: int
          ) -> HyperbolicWitness | None:
    pts = disk_samples(lam0.value, r, samples)
    # the seed rotates the visiting order only; the sample set is fixed
    order = np.roll(np.arange(samples), -(seed % samples)) if samples else np.arange(0)
    pts = pts[order]
    settings = ClassifySettings(policy, delta=1.0)
    tags, _, _, _ = classify_array(pts, settings)
    hits = [i for i in range(samples) if TAG_NAMES[int(tags[i])] == "attracting"]
    hits.sort(key=lambda i: (abs(pts[i] - lam0.value), i))
    for i in hits[:SCAN_CERTIFY_ATTEMPTS]:
        lam = Param(complex(pts[i]))
        if abs(lam.value - lam0.value) > r:
            continue
        cls = classify_parameter(lam, policy)
        if cls.cycle is None:
            continue
        cert = certify_cycle(lam, cls.cycle)
        if cert is not None:
            return HyperbolicWitness(lam, cls.cycle, cert, abs(lam.value - lam0.value), "scan")
    return None


def _nearest_translate(im_target: float, im_ref: float) -> list[float]:
    """im_target + 2 pi k for the two k nearest to im_ref."""
    k = round((im_ref - im_target) / TWO_PI)
    cands = [im_target + TWO_PI * (k + j) for j in (-1, 0, 1)]
    cands.sort(key=lambda v: abs(v - im_ref))
    return cands[:2]


def _route(lam0: Param, r: float, max_n: int = ROUTE_MAX_N) -> HyperbolicWitness | None:
    rec0 = full_orbit(lam0, EscapePolicy(re_threshold=K.EVAL_LIMIT, max_iter=max_n + 1,
                                         max_period=1))
    for n in range(1, min(max_n, rec0.last_index - 1) + 1):
        zn = rec0[n]
        M = max(MIN_ROUTE_M, zn.real)
        route = build_route(lam0, x0=M, M=M)
        for im1 in _nearest_translate(route.line_im, zn.imag):
            w = _try_route_target(lam0, r, n, complex(route.waypoints[0].real, im1), route)
            if w is not None:
                return w
    return None


def _try_route_target(lam0: Param, r: float, n: int, z1: complex, route: TargetRoute
                      ) -> HyperbolicWitness | None:
    try:
        lam = _steer(lam0.value, n, z1)
        if abs(lam - lam0.value) > r:
            return None
        # flip: zeta_{n+1} onto L + pi i, at least as far right as the route asks
        z_next, _ = _zeta(lam, n + 1)
        if z_next is None:
            return None
        flip_re = max(route.flip_target.real, z_next.real)
        if flip_re > 1e15:
            return None  # the phase of such a point is not resolved in double precision
        im2 = _nearest_translate(route.flip_target.imag, z_next.imag)[0]
        lam = _steer(lam, n + 1, complex(flip_re, im2))
    except (NoConvergence, OverflowEnclosure):
        return None
    if abs(lam - lam0.value) > r:
        return None
    try:
        P = Param(lam)
        cycle = _ext_cycle(P, 0j, n + 3)
    except (NoConvergence, OverflowEnclosure, ParamError):
        return None
    if not abs(cycle.multiplier) < 1.0:
        return None
    pts = cycle_points(P, cycle)
    # the flip point first: smallest accumulated rounding in front of the collapse
    cert = certify_cycle(P, cycle, centers=pts[::-1], multiples=(1,))
    if cert is None:
        return None
    return HyperbolicWitness(P, cycle, cert, abs(lam - lam0.value), "route")


def find_hyperbolic_near(lam0: Param | complex, r: float, policy: EscapePolicy | None = None,
                         strategy: str = "auto", samples: int = SCAN_SAMPLES, seed: int = 0
                         ) -> HyperbolicWitness:
    """A certified hyperbolic parameter in D(lam0, r).

    strategy is "scan", "route", or "auto" (scan, then route).
    Raises NotFound when the budget is exhausted.
    """
    lam0 = Param.coerce(lam0)
    if not r > 0:
        raise ValueError("r must be positive")
    if strategy not in ("scan", "route", "auto"):
        raise ValueError(f"unknown strategy {strategy!r}")
    policy = policy or EscapePolicy(max_iter=500)
    tried = 0
    if strategy in ("scan", "auto"):
        w = _scan(lam0, r, policy, samples, seed)
        tried += samples
        if w is not None:
            return w
    if strategy in ("route", "auto"):
        w = _route(lam0, r)
        tried += 1
        if w is not None:
            return w
    raise NotFound(f"no certified hyperbolic parameter within {r:g} of {lam0.value}", tried)
