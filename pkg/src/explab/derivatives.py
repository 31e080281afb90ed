"""Phase and parameter derivatives along the singular orbit.

Products of derivatives are kept as (log-magnitude, argument) pairs because
|Df^n(0)| overflows within a few dozen steps. The reciprocal sum
S_n = sum_{j<=n} 1/(f^j)'(0) is kept as an ordinary complex number.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from explab.orbit import EscapePolicy, OrbitRecord, OrbitStatus, Param, TWO_PI, full_orbit

# Beyond this the reciprocal term is below 1e-304 and is dropped from S.
LOG_NEGLIGIBLE = 700.0
# Below this the reciprocal term would overflow; the ledger stops there.
LOG_OVERFLOW_GUARD = -690.0
CROSS_CHECK_TOL = 1e-10


class DisagreementError(ArithmeticError):
    """The recursive and closed-form parameter derivatives disagree."""


class NoExpansionFound(RuntimeError):
    pass


def _wrap(a: float) -> float:
    """Reduce an angle to [0, 2 pi)."""
    r = math.fmod(a, TWO_PI)
    return r + TWO_PI if r < 0 else r


@dataclass(frozen=True)
class ScaledComplex:
    """A complex number stored as exp(log_mag + i*arg); log_mag = -inf is zero."""

    log_mag: float
    arg: float

    @classmethod
    def from_complex(cls, z: complex) -> "ScaledComplex":
        if z == 0:
            return cls(-math.inf, 0.0)
        return cls(math.log(abs(z)), math.atan2(z.imag, z.real))

    @property
    def is_zero(self) -> bool:
        return self.log_mag == -math.inf

    def to_complex(self) -> complex:
        if self.is_zero:
            return 0j
        if self.log_mag > 709.0:
            raise OverflowError(f"magnitude e^{self.log_mag:.1f} is not representable")
        m = math.exp(self.log_mag)
        return complex(m * math.cos(self.arg), m * math.sin(self.arg))

    def __mul__(self, other: "ScaledComplex") -> "ScaledComplex":
        return ScaledComplex(self.log_mag + other.log_mag, self.arg + other.arg)

    def __truediv__(self, other: "ScaledComplex") -> "ScaledComplex":
        return ScaledComplex(self.log_mag - other.log_mag, self.arg - other.arg)

    def relative_gap(self, other: "ScaledComplex") -> float:
        """|self/other - 1|, computed without leaving log space."""
        if self.is_zero or other.is_zero:
            return 0.0 if self.is_zero and other.is_zero else math.inf
        d = complex(self.log_mag - other.log_mag, _wrap(self.arg - other.arg + math.pi) - math.pi)
        return float(abs(np.expm1(d)))

    def add_complex(self, c: complex) -> "ScaledComplex":
        """self + c, with c of ordinary size."""
        if self.is_zero:
            return ScaledComplex.from_complex(c)
        if self.log_mag < 0.0:
            return ScaledComplex.from_complex(self.to_complex() + c)
        # e^L (u + c e^{-L}) with u the unit phase
        inner = complex(math.cos(self.arg), math.sin(self.arg))
        if self.log_mag < LOG_NEGLIGIBLE:
            inner += c * math.exp(-self.log_mag)
        if inner == 0:
            return ScaledComplex(-math.inf, 0.0)
        return ScaledComplex(self.log_mag + math.log(abs(inner)),
                             math.atan2(inner.imag, inner.real))


@dataclass(frozen=True)
class LedgerEntry:
    index: int
    zeta: complex
    log_mag_D: float
    arg_D: float
    S: complex
    T: complex


@dataclass(frozen=True)
class DerivativeLedger:
    lam: Param
    entries: tuple[LedgerEntry, ...] = field(repr=False)
    truncated_at: int
    status: OrbitStatus
    # why the ledger ended: "budget", "escape", or "overflow_guard"
    stop_reason: str = "budget"
    neglected_tail: float = 0.0

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, j: int) -> LedgerEntry:
        return self.entries[j]

    def term(self, j: int) -> complex:
        """1/(f^j)'(0), or 0 once it is below representable size."""
        e = self.entries[j]
        if e.log_mag_D > LOG_NEGLIGIBLE:
            return 0j
        m = math.exp(-e.log_mag_D)
        return complex(m * math.cos(e.arg_D), -m * math.sin(e.arg_D))

    def rows(self) -> list[list[float]]:
        return [[e.index, e.zeta.real, e.zeta.imag, e.log_mag_D, e.arg_D,
                 e.S.real, e.S.imag, e.T.real, e.T.imag] for e in self.entries]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LEDGER_COLUMNS)
            for row in self.rows():
                w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


LEDGER_COLUMNS = ("n", "Re_zeta", "Im_zeta", "log_mag_D", "arg_D", "Re_S", "Im_S", "Re_T", "Im_T")


def ledger_from_record(record: OrbitRecord) -> DerivativeLedger:
    lam = record.lam
    log_abs, arg_lam = lam.log_abs, lam.arg
    entries = []
    log_mag, arg_d = 0.0, 0.0
    S = 0j
    tail = 0.0
    stop = "escape" if record.status.escaped else "budget"
    for j, z in enumerate(record.points):
        z = complex(z)
        if j > 0:
            prev = complex(record.points[j - 1])
            log_mag += log_abs + prev.real
            arg_d = _wrap(arg_d + arg_lam + prev.imag)
        if log_mag < LOG_OVERFLOW_GUARD:
            stop = "overflow_guard"
            break
        T = S / lam.value if j > 0 else 0j
        if log_mag > LOG_NEGLIGIBLE:
            tail += math.exp(-min(log_mag, 745.0))
        else:
            m = math.exp(-log_mag)
            S += complex(m * math.cos(arg_d), -m * math.sin(arg_d))
        entries.append(LedgerEntry(j, z, log_mag, arg_d, S, T))
    return DerivativeLedger(lam, tuple(entries), len(entries) - 1, record.status, stop, tail)


def build_ledger(lam: Param | complex, policy: EscapePolicy | None = None) -> DerivativeLedger:
    """Ledger of the singular orbit, iterated past cycle suspicion up to escape or budget."""
    return ledger_from_record(full_orbit(Param.coerce(lam), policy or EscapePolicy(max_iter=200)))


def _derivative_recursive(ledger: DerivativeLedger, n: int) -> ScaledComplex:
    # zeta'_{j+1} = f'(zeta_j) * zeta'_j + exp(zeta_j) = f'(zeta_j) * (zeta'_j + 1/lam)
    lam = ledger.lam
    inv_lam = 1.0 / lam.value
    d = ScaledComplex(-math.inf, 0.0)
    for j in range(n):
        z = ledger.entries[j].zeta
        alpha = ScaledComplex(lam.log_abs + z.real, lam.arg + z.imag)
        d = d.add_complex(inv_lam) * alpha
    return d


def _derivative_closed(ledger: DerivativeLedger, n: int) -> ScaledComplex:
    e = ledger.entries[n]
    return ScaledComplex.from_complex(e.T) * ScaledComplex(e.log_mag_D, e.arg_D)


def _within_cancellation(ledger: DerivativeLedger, n: int, rec: ScaledComplex,
                         closed: ScaledComplex, tol: float) -> bool:
    """Whether |rec - closed| is below tol times the size of the summed terms.

    Near a true zero of zeta'_n the partial sum S_{n-1} cancels, and a
    relative comparison of the two forms is meaningless.
    """
    logs = np.array([e.log_mag_D for e in ledger.entries[:n]])
    m = float(np.max(-logs))
    log_terms = m + math.log(float(np.sum(np.exp(-logs - m))))
    log_scale = ledger.entries[n].log_mag_D - ledger.lam.log_abs + log_terms
    if rec.is_zero or closed.is_zero:
        other = closed if rec.is_zero else rec
        log_diff = other.log_mag
    else:
        log_diff = closed.log_mag + math.log(max(rec.relative_gap(closed), 1e-300))
    return log_diff < math.log(tol) + log_scale


def param_derivative(ledger: DerivativeLedger, n: int, tol: float = CROSS_CHECK_TOL
                     ) -> ScaledComplex:
    """d zeta_n / d lambda, cross-checked between recursion and closed form."""
    if not 0 <= n <= ledger.truncated_at:
        raise IndexError(f"n={n} outside ledger range 0..{ledger.truncated_at}")
    if n == 0:
        return ScaledComplex(-math.inf, 0.0)
    if n == 1:
        return ScaledComplex(0.0, 0.0)  # zeta_1 = lambda
    rec = _derivative_recursive(ledger, n)
    closed = _derivative_closed(ledger, n)
    gap = rec.relative_gap(closed)
    if not gap < tol and not _within_cancellation(ledger, n, rec, closed, tol):
        raise DisagreementError(
            f"zeta'_{n}: recursion and closed form differ by relative {gap:.3e}")
    return closed


@dataclass(frozen=True)
class LevinEstimate:
    value: complex
    terms_used: int
    tail_bound: float
    converged: bool
    diverging: bool = False


def levin_estimate(ledger: DerivativeLedger, tol: float = 1e-12) -> LevinEstimate:
    """Estimate L = sum_j 1/(f^j)'(0).

    Stops at the first index where the last three term magnitudes decrease and
    the geometric tail bound drops below ``tol``.
    """
    mags = [abs(ledger.term(j)) for j in range(len(ledger))]
    for n in range(3, len(mags)):
        window = mags[n - 3:n + 1]
        if not all(window[i + 1] < window[i] for i in range(3)):
            continue
        if mags[n] == 0.0:
            tail = ledger.neglected_tail
        else:
            ratio = mags[n] / mags[n - 1]
            tail = mags[n] * ratio / (1.0 - ratio) + ledger.neglected_tail
        if tail < tol:
            value = ledger.entries[n].S
            if abs(value) > 0:
                return LevinEstimate(value, n + 1, tail, True)
    last = ledger.entries[-1].S
    growing = len(mags) >= 4 and all(mags[-i] > mags[-i - 1] for i in range(1, 4))
    growing = growing or ledger.stop_reason == "overflow_guard"
    return LevinEstimate(last, len(mags), math.inf, False, growing)


def transversality_ratio(ledger: DerivativeLedger, n: int) -> complex:
    """T_n = zeta'_n / (f^n)'(0) = S_{n-1}/lambda.

    For an escaped ledger, indices past the end return the limit S/lambda: the
    remaining terms are smaller than e^{-threshold} times the last one.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n <= ledger.truncated_at:
        return ledger.entries[n].T
    if ledger.stop_reason == "escape":
        return ledger.entries[-1].S / ledger.lam.value
    raise IndexError(f"n={n} beyond ledger end {ledger.truncated_at}")


@dataclass(frozen=True)
class ExpansionEstimate:
    N_tilde: int
    gamma_tilde: float
    samples_checked: int
    C1: float
    gamma1: float


def _log_derivative_prefix(record: OrbitRecord, length: int) -> np.ndarray:
    """log|f'(zeta_i)| for i < length, continuing a periodic tail if needed."""
    la = record.lam.log_abs
    return np.array([la + record.extended(i).real for i in range(length)])


def expansion_constants(record: OrbitRecord, k_max: int) -> ExpansionEstimate:
    """Smallest block length N with min_j |Df^N(zeta_j)| > 1 over the truncated orbit."""
    periodic = record.periodic_tail() is not None
    if periodic:
        start_points = record.status.at_index
        length = start_points + k_max
    else:
        if len(record) < k_max + 2:
            raise ValueError(f"record has {len(record)} points; need >= {k_max + 2}")
        if record.status.escaped and record.status.at_index < k_max:
            raise ValueError("orbit escaped before k_max")
        length = len(record)
    logd = _log_derivative_prefix(record, length)
    csum = np.concatenate([[0.0], np.cumsum(logd)])
    for k in range(1, k_max + 1):
        n_starts = start_points if periodic else length - k + 1
        if n_starts < 1:
            break
        m = min(csum[j + k] - csum[j] for j in range(n_starts))
        if m > 0.0:
            gamma = math.exp(m)
            c1 = min(math.exp(csum[j]) for j in range(k)) / gamma
            return ExpansionEstimate(k, gamma, n_starts, c1, gamma ** (1.0 / k))
    raise NoExpansionFound(f"no block length <= {k_max} expands along the orbit")
