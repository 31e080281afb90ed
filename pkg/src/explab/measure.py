"""Seeded Monte-Carlo densities of classification outcomes in parameter disks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from explab import _kernels as K
from explab._parallel import chunk_bounds, resolve_threads, run_all
from explab.classify import ClassifySettings, classify_array
from explab.orbit import EscapePolicy, Param

CHUNK = 1024
COUNT_KEYS = ("n_attracting", "n_escaping", "n_candidate", "n_undecided", "n_hit_annulus")
_TAG_KEY = {
    K.TAG_ATTRACTING: "n_attracting",
    K.TAG_ESCAPING: "n_escaping",
    K.TAG_CANDIDATE: "n_candidate",
    K.TAG_UNDECIDED: "n_undecided",
}


def unit_disk_point(seed: int, index: int) -> complex:
    """Uniform point of the open unit disk from the counter stream (seed, index)."""
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))
    while True:
        x, y = gen.random(2) * 2.0 - 1.0
        if x * x + y * y < 1.0:
            return complex(x, y)


def sample_points(lambda0: Param | complex, r: float, samples: int, seed: int,
                  include_center: bool = False) -> np.ndarray:
    """The parameters a scan of D(lambda0, r) classifies, in sample-index order.

    Every radius reuses the same unit-disk draws. With ``include_center`` the
    sample of index 0 is lambda0 itself.
    """
    lam0 = Param.coerce(lambda0).value
    unit = np.array([unit_disk_point(seed, i) for i in range(samples)], dtype=np.complex128)
    if include_center and samples:
        unit[0] = 0j
    return lam0 + r * unit


@dataclass(frozen=True)
class DensityReport:
    lambda0: Param
    delta: float
    radii: tuple[float, ...]
    budgets: tuple[int, ...]
    samples: int
    seed: int
    # cells[i][j] holds the counts for radii[i] and budgets[j]
    cells: tuple[tuple[dict, ...], ...] = field(repr=False)
    annulus: tuple[float, float] = (0.0, 0.0)
    re_threshold: float = 50.0

    def fraction(self, key: str) -> np.ndarray:
        return np.array([[c[key] / self.samples for c in row] for row in self.cells])

    def candidate_fraction(self) -> np.ndarray:
        return self.fraction("n_candidate")

    def escaping_fraction(self) -> np.ndarray:
        return self.fraction("n_escaping")

    def to_json(self) -> dict:
        return {
            "lambda0": [self.lambda0.value.real, self.lambda0.value.imag],
            "delta": self.delta,
            "radii": list(self.radii),
            "budgets": list(self.budgets),
            "samples": self.samples,
            "seed": self.seed,
            "re_threshold": self.re_threshold,
            "annulus": {"inner": self.annulus[0], "outer": self.annulus[1]},
            "hit_annulus": {"inner": self.delta / 2.0, "outer": 0.75 * self.delta},
            "cells": [[dict(c) for c in row] for row in self.cells],
            "candidate_fraction": self.candidate_fraction().tolist(),
        }

    def write_csv(self, path: str | Path, key: str = "n_candidate") -> None:
        """Rows are radii, columns budgets, values the fraction for ``key``."""
        frac = self.fraction(key)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["radius"] + [f"budget_{b}" for b in self.budgets])
            for r, row in zip(self.radii, frac):
                w.writerow([repr(r)] + [repr(float(v)) for v in row])


def _count(lams: np.ndarray, settings: ClassifySettings, annulus: tuple[float, float],
           threads: int) -> dict:
    def work(lo, hi):
        tags, _, _, hits = classify_array(lams[lo:hi], settings, annulus)
        return np.bincount(tags, minlength=4), int(hits.sum())

    parts = run_all([lambda lo=lo, hi=hi: work(lo, hi) for lo, hi in chunk_bounds(lams.size, CHUNK)],
                    threads)
    tag_counts = sum((p[0] for p in parts), np.zeros(4, np.int64))
    out = {key: int(tag_counts[tag]) for tag, key in _TAG_KEY.items()}
    out["n_hit_annulus"] = sum(p[1] for p in parts)
    return out


def _validate(radii, budgets, samples):
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if not radii or any(not r > 0 for r in radii):
        raise ValueError("radii must be positive")
    if any(a <= b for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly descending")
    if not budgets or any(b < 1 for b in budgets):
        raise ValueError("budgets must be positive")
    if any(a >= b for a, b in zip(budgets, budgets[1:])):
        raise ValueError("budgets must be strictly ascending")


def density_scan(lambda0: Param | complex, delta: float, radii, budgets, samples: int,
                 seed: int, policy: EscapePolicy | None = None, threads: int | None = None,
                 include_center: bool = False) -> DensityReport:
    """Classify ``samples`` uniform parameters of each D(lambda0, r) at each budget.

    Orbit points of index >= 1 falling in A(delta/2, 3 delta/4) are counted
    per sample as annulus hits.
    """
    lam0 = Param.coerce(lambda0)
    radii = tuple(float(r) for r in radii)
    budgets = tuple(int(b) for b in budgets)
    _validate(radii, budgets, samples)
    if not delta > 0:
        raise ValueError("delta must be positive")
    policy = policy or EscapePolicy()
    threads = resolve_threads(threads)
    hit_annulus = (delta / 2.0, 0.75 * delta)
    cells = []
    for r in radii:
        lams = sample_points(lam0, r, samples, seed, include_center)
        row = []
        for b in budgets:
            settings = ClassifySettings(policy.with_budget(b), delta)
            row.append(_count(lams, settings, hit_annulus, threads))
        cells.append(tuple(row))
    report = DensityReport(lam0, float(delta), radii, budgets, samples, seed, tuple(cells),
                           (delta / 4.0, float(delta)), policy.re_threshold)
    check_budget_monotone(report)
    return report


def check_budget_monotone(report: DensityReport) -> None:
    frac = report.candidate_fraction()
    if np.any(np.diff(frac, axis=1) > 0):
        raise AssertionError("candidate fraction increased with the budget")


def escaping_density(lambda0: Param | complex, radii, samples: int,
                     policy: EscapePolicy | None = None, seed: int = 0,
                     threads: int | None = None) -> DensityReport:
    """Escaping fraction per radius at the policy's budget (see ``escaping_fraction``)."""
    policy = policy or EscapePolicy()
    return density_scan(lambda0, 1.0, radii, [policy.max_iter], samples, seed, policy, threads)


def binomial_stderr(fraction: float, samples: int) -> float:
    return math.sqrt(max(fraction * (1.0 - fraction), 0.0) / samples)
