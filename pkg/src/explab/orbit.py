"""Evaluation and iteration of f(z) = lam * exp(z) along the singular orbit."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from explab import _kernels as K

TWO_PI = 2.0 * math.pi

# |lam| * e^50 must stay far from the float ceiling.
MAX_PARAM_MODULUS = 1e100


class ParamError(ValueError):
    """Raised for lam = 0 or a non-finite parameter."""


def _check_finite(z: complex, what: str) -> None:
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{what} must be finite, got {z!r}")


@dataclass(frozen=True)
class Param:
    """A parameter of the family; zero is not a member."""

    value: complex

    def __post_init__(self):
        v = complex(self.value)
        object.__setattr__(self, "value", v)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ParamError(f"parameter must be finite, got {v!r}")
        if v == 0:
            raise ParamError("lambda = 0 is not in the exponential family")
        if abs(v) > MAX_PARAM_MODULUS:
            raise ParamError(f"|lambda| exceeds {MAX_PARAM_MODULUS:g}")

    @classmethod
    def coerce(cls, value: "Param | complex | float") -> "Param":
        return value if isinstance(value, Param) else cls(complex(value))

    @property
    def arg(self) -> float:
        return math.atan2(self.value.imag, self.value.real)

    @property
    def log_abs(self) -> float:
        return math.log(abs(self.value))


@dataclass(frozen=True)
class EscapePolicy:
    re_threshold: float = 50.0
    max_iter: int = 1000
    cycle_suspect_tol: float = 1e-9
    max_period: int = 64

    def __post_init__(self):
        if not self.re_threshold <= K.EVAL_LIMIT:
            raise ValueError(f"re_threshold must be <= {K.EVAL_LIMIT}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.max_period < 1:
            raise ValueError("max_period must be positive")

    def with_budget(self, max_iter: int) -> "EscapePolicy":
        return EscapePolicy(self.re_threshold, max_iter, self.cycle_suspect_tol,
                            self.max_period)


@dataclass(frozen=True)
class EscapeSignal:
    """Returned instead of a value when Re(z) is past the escape threshold."""

    z: complex
    threshold: float


@dataclass(frozen=True)
class OrbitPoint:
    index: int
    value: complex


@dataclass(frozen=True)
class OrbitStatus:
    kind: str  # "completed" | "escaped" | "cycle_suspected"
    at_index: int | None = None
    period: int | None = None

    @property
    def escaped(self) -> bool:
        return self.kind == "escaped"

    @property
    def cycle_suspected(self) -> bool:
        return self.kind == "cycle_suspected"

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.at_index is not None:
            out["at_index"] = self.at_index
        if self.period is not None:
            out["period"] = self.period
        return out


COMPLETED = OrbitStatus("completed")


@dataclass(frozen=True)
class OrbitRecord:
    """Finite truncation of the singular orbit zeta_n = f^n(0)."""

    lam: Param
    points: np.ndarray = field(repr=False)
    status: OrbitStatus
    policy: EscapePolicy

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[OrbitPoint]:
        for i, z in enumerate(self.points):
            yield OrbitPoint(i, complex(z))

    def __getitem__(self, n: int) -> complex:
        return complex(self.points[n])

    @property
    def last_index(self) -> int:
        return len(self.points) - 1

    def periodic_tail(self) -> tuple[int, int] | None:
        """(start, period) when the record ends on a suspected cycle."""
        if not self.status.cycle_suspected:
            return None
        p = self.status.period
        return self.status.at_index - p, p

    def extended(self, n: int) -> complex:
        """zeta_n, continuing a suspected cycle periodically past the record end."""
        if n <= self.last_index:
            return complex(self.points[n])
        tail = self.periodic_tail()
        if tail is None:
            raise IndexError(f"index {n} beyond truncated orbit (last {self.last_index})")
        start, p = tail
        return complex(self.points[start + (n - start) % p])

    def to_json(self) -> dict:
        return {
            "lambda": [self.lam.value.real, self.lam.value.imag],
            "points": [[float(z.real), float(z.imag)] for z in self.points],
            "status": self.status.to_json(),
            "policy": {
                "re_threshold": self.policy.re_threshold,
                "max_iter": self.policy.max_iter,
                "cycle_suspect_tol": self.policy.cycle_suspect_tol,
                "max_period": self.policy.max_period,
            },
        }


def step(lam: Param | complex, z: complex, policy: EscapePolicy | None = None
         ) -> complex | EscapeSignal:
    """One application of f; an EscapeSignal instead of a value past the threshold."""
    lam = Param.coerce(lam)
    threshold = (policy or EscapePolicy()).re_threshold
    w, esc = K.step(lam.value, complex(z), threshold)
    if esc:
        return EscapeSignal(complex(z), threshold)
    return w


def _run(lam: Param, policy: EscapePolicy, stop_on_cycle: bool) -> OrbitRecord:
    buf = np.empty(policy.max_iter + 2, dtype=np.complex128)
    n, status, period, at_index = K.orbit_fill(
        lam.value, policy.re_threshold, policy.max_iter, policy.cycle_suspect_tol,
        policy.max_period, stop_on_cycle, buf)
    pts = buf[:n].copy()
    pts.setflags(write=False)
    if status == K.ESCAPED:
        st = OrbitStatus("escaped", at_index=int(at_index))
    elif status == K.CYCLE_SUSPECTED:
        st = OrbitStatus("cycle_suspected", at_index=int(at_index), period=int(period))
    else:
        st = COMPLETED
    return OrbitRecord(lam, pts, st, policy)


def singular_orbit(lam: Param | complex, policy: EscapePolicy | None = None) -> OrbitRecord:
    """Iterate 0 until the budget runs out, the orbit escapes, or a cycle is suspected."""
    return _run(Param.coerce(lam), policy or EscapePolicy(), True)


def full_orbit(lam: Param | complex, policy: EscapePolicy | None = None) -> OrbitRecord:
    """Like :func:`singular_orbit` but keeps iterating after a cycle suspicion.

    The first suspicion is still reported in the status; only escape or the
    budget end the record.
    """
    return _run(Param.coerce(lam), policy or EscapePolicy(), False)


def inverse_step(lam: Param | complex, w: complex, ref: complex) -> complex:
    """The preimage log(w/lam) + 2 pi i k lying nearest to ``ref``.

    Ties go to the smaller k. w = 0 is the omitted value and has no preimage.
    """
    lam = Param.coerce(lam)
    w = complex(w)
    if w == 0:
        raise ValueError("0 is the omitted value of lambda*exp(z); it has no preimage")
    _check_finite(w, "w")
    base = complex(math.log(abs(w)) - lam.log_abs, cmath.phase(w) - lam.arg)
    t = (complex(ref).imag - base.imag) / TWO_PI
    k = math.ceil(t - 0.5)
    return complex(base.real, base.imag + TWO_PI * k)


class BlockView:
    """Subsampled view xi_n = zeta_{n N}, with intermediates xi_{n,k} = zeta_{n N + k}.

    Wraps the record's array without copying.
    """

    def __init__(self, record: OrbitRecord, n_tilde: int):
        if n_tilde < 1:
            raise ValueError("block length must be >= 1")
        self.record = record
        self.n_tilde = n_tilde
        self.points = record.points[::n_tilde]

    def __len__(self) -> int:
        return len(self.points)

    def xi(self, n: int) -> complex:
        return complex(self.points[n])

    def xi_nk(self, n: int, k: int) -> complex:
        if not 0 <= k < self.n_tilde:
            raise IndexError("k must satisfy 0 <= k < N")
        return complex(self.record.points[n * self.n_tilde + k])


def block_orbit(record: OrbitRecord, n_tilde: int) -> BlockView:
    return BlockView(record, n_tilde)
