"""Budgeted classification of parameters.

A parameter is Attracting when the singular orbit settles on a cycle that
Newton refinement confirms with |multiplier| < 1 - margin, Escaping when the
orbit crosses the escape threshold, a non-recurrence candidate when neither
happens and the orbit never enters D(0, delta), and Undecided otherwise.
All verdicts hold only within the iteration budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from explab import _kernels as K
from explab.orbit import EscapePolicy, OrbitRecord, Param

REFINE_TOL = 1e-11
ATTRACTING_MARGIN = 1e-6
NEWTON_MAX_ITER = 50

SIEGEL_CAVEAT = "Siegel disks and Cremer points are not detected"


class CycleNotFound(LookupError):
    pass


class NoConvergence(ArithmeticError):
    pass


class DerivativeSingular(NoConvergence):
    """Newton hit a point where the derivative of f^p(z) - z vanishes."""


@dataclass(frozen=True)
class CycleInfo:
    period: int
    point: complex
    multiplier: complex
    residual: float

    @property
    def attracting(self) -> bool:
        return abs(self.multiplier) < 1.0

    def to_json(self) -> dict:
        return {
            "period": self.period,
            "point": [self.point.real, self.point.imag],
            "multiplier": [self.multiplier.real, self.multiplier.imag],
            "residual": self.residual,
        }


@dataclass(frozen=True)
class Verdict:
    holds: bool
    delta: float
    budget: int
    violated_at: int | None = None

    @property
    def kind(self) -> str:
        return "holds_within_budget" if self.holds else "violated_at"

    def to_json(self) -> dict:
        out = {"kind": self.kind, "delta": self.delta, "budget": self.budget}
        if not self.holds:
            out["step"] = self.violated_at
        return out


@dataclass(frozen=True)
class ParamClass:
    tag: str  # "attracting" | "escaping" | "nr_candidate" | "undecided"
    budget: int
    cycle: CycleInfo | None = None
    escape_index: int | None = None
    verdict: Verdict | None = None

    def to_json(self) -> dict:
        out: dict = {"tag": self.tag, "budget": self.budget}
        if self.cycle is not None:
            out["cycle"] = self.cycle.to_json()
        if self.escape_index is not None:
            out["escape_index"] = self.escape_index
        if self.verdict is not None:
            out["verdict"] = self.verdict.to_json()
        if self.tag == "nr_candidate":
            out["caveat"] = SIEGEL_CAVEAT
        return out


TAG_NAMES = {
    K.TAG_UNDECIDED: "undecided",
    K.TAG_ATTRACTING: "attracting",
    K.TAG_ESCAPING: "escaping",
    K.TAG_CANDIDATE: "nr_candidate",
}


def newton_refine_cycle(lam: Param | complex, z0: complex, p: int, tol: float = REFINE_TOL,
                        max_iter: int = NEWTON_MAX_ITER) -> CycleInfo:
    """Newton's method on f^p(z) - z from z0; the multiplier is measured at the root."""
    lam = Param.coerce(lam)
    if p < 1:
        raise ValueError("period must be >= 1")
    z, mult, res, code, _ = K.newton_cycle(lam.value, complex(z0), p, tol, max_iter)
    if code == K.NEWTON_SINGULAR:
        raise DerivativeSingular(f"Df^{p}(z) - 1 vanishes near {z}")
    if code != K.NEWTON_OK:
        raise NoConvergence(f"Newton for period {p} from {z0} did not converge")
    return CycleInfo(p, z, mult, res)


def detect_attracting_cycle(lam: Param | complex, policy: EscapePolicy | None = None,
                            refine_tol: float = REFINE_TOL,
                            margin: float = ATTRACTING_MARGIN) -> CycleInfo:
    """Attracting cycle that captures the singular orbit, if seen within the budget.

    Raises CycleNotFound otherwise.
    """
    lam = Param.coerce(lam)
    policy = policy or EscapePolicy()
    buf = np.empty(policy.max_iter + 2, dtype=np.complex128)
    n, status, period, _ = K.orbit_fill(
        lam.value, policy.re_threshold, policy.max_iter, policy.cycle_suspect_tol,
        policy.max_period, True, buf)
    if status != K.CYCLE_SUSPECTED:
        raise CycleNotFound("no cycle suspected within the budget")
    q, z, mult, res, code = K.refine_suspect(lam.value, buf[n - 1], period, refine_tol,
                                             NEWTON_MAX_ITER)
    if code != K.NEWTON_OK or not res < refine_tol:
        raise CycleNotFound(f"refinement of suspected period-{period} cycle failed")
    if not abs(mult) < 1.0 - margin:
        raise CycleNotFound(f"period-{q} cycle has |multiplier| = {abs(mult):.6g}")
    return CycleInfo(int(q), complex(z), complex(mult), float(res))


def is_delta_nonrecurrent(record: OrbitRecord, delta: float) -> Verdict:
    if not delta > 0:
        raise ValueError("delta must be positive")
    mods = np.abs(record.points[1:])
    hits = np.flatnonzero(mods < delta)
    budget = record.policy.max_iter
    if hits.size:
        return Verdict(False, delta, budget, int(hits[0]) + 1)
    return Verdict(True, delta, budget)


@dataclass(frozen=True)
class ClassifySettings:
    """Everything besides lambda that a classification depends on."""

    policy: EscapePolicy
    delta: float
    refine_tol: float = REFINE_TOL
    margin: float = ATTRACTING_MARGIN

    def kernel_args(self) -> tuple:
        p = self.policy
        return (p.re_threshold, p.max_iter, self.delta, p.cycle_suspect_tol, p.max_period,
                self.refine_tol, self.margin, NEWTON_MAX_ITER)


def classify_parameter(lam: Param | complex, policy: EscapePolicy | None = None,
                       delta: float = 1.0, refine_tol: float = REFINE_TOL,
                       margin: float = ATTRACTING_MARGIN) -> ParamClass:
    """Attracting > Escaping > NonRecurrentCandidate > Undecided."""
    lam = Param.coerce(lam)
    if not delta > 0:
        raise ValueError("delta must be positive")
    settings = ClassifySettings(policy or EscapePolicy(), delta, refine_tol, margin)
    return _classify(lam.value, settings)


def _classify(lam: complex, settings: ClassifySettings) -> ParamClass:
    thr, budget, delta, ctol, mp, rtol, margin, nit = settings.kernel_args()
    buf = np.empty(budget + 2, dtype=np.complex128)
    tag, q, z, mult, res, esc, violated, _, _ = K.classify_one(
        lam, thr, budget, delta, ctol, mp, rtol, margin, nit, buf, 0.0, 0.0)
    name = TAG_NAMES[tag]
    verdict = Verdict(violated == 0, delta, budget, int(violated) or None)
    if name == "attracting":
        return ParamClass(name, budget, cycle=CycleInfo(int(q), complex(z), complex(mult), float(res)))
    if name == "escaping":
        return ParamClass(name, budget, escape_index=int(esc))
    return ParamClass(name, budget, verdict=verdict)


def classify_array(lams: np.ndarray, settings: ClassifySettings,
                   annulus: tuple[float, float] = (0.0, 0.0)):
    """Vectorized classification; returns (tags, periods, escape_index, annulus_hits).

    Uses exactly the scalar kernel behind :func:`classify_parameter`.
    """
    lams = np.ascontiguousarray(lams, dtype=np.complex128).ravel()
    n = lams.size
    tags = np.empty(n, np.int8)
    periods = np.empty(n, np.int32)
    esc = np.empty(n, np.int32)
    hits = np.empty(n, np.bool_)
    thr, budget, delta, ctol, mp, rtol, margin, nit = settings.kernel_args()
    K.classify_many(lams, thr, budget, delta, ctol, mp, rtol, margin, nit,
                    annulus[0], annulus[1], tags, periods, esc, hits)
    return tags, periods, esc, hits
