import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from explab.classify import classify_parameter
from explab.measure import (
    COUNT_KEYS, binomial_stderr, density_scan, escaping_density, sample_points, unit_disk_point,
)
from explab.orbit import EscapePolicy

TWO_PI_I = 2j * math.pi


def _class_counts(cell):
    return sum(cell[k] for k in COUNT_KEYS[:4])


def test_unit_disk_point_is_stable_and_inside():
    a = unit_disk_point(42, 7)
    assert a == unit_disk_point(42, 7) and abs(a) < 1
    assert a != unit_disk_point(42, 8) and a != unit_disk_point(43, 7)


def test_single_center_sample_is_candidate():
    rep = density_scan(TWO_PI_I, 1.0, [0.01], [20, 40, 80], 1, 0, include_center=True)
    for cell in rep.cells[0]:
        assert cell["n_candidate"] == 1 and cell["n_hit_annulus"] == 0


def test_hyperbolic_center_is_all_attracting():
    rep = density_scan(-1, 1.0, [1e-3], [200], 500, 1)
    assert rep.cells[0][0]["n_attracting"] == 500


def test_escaping_examples():
    # regression value: the rest of this disk is attracting through collapsing cycles
    rep = escaping_density(1, [0.05], 2000, seed=3)
    assert rep.escaping_fraction()[0, 0] == pytest.approx(0.4225)
    assert rep.cells[0][0]["n_attracting"] + rep.cells[0][0]["n_escaping"] == 2000
    assert escaping_density(-1, [1e-3], 500).escaping_fraction()[0, 0] == 0


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        density_scan(TWO_PI_I, 1.0, [0.01], [20], 0, 0)
    with pytest.raises(ValueError):
        escaping_density(1, [0.05], 0)
    with pytest.raises(ValueError):
        density_scan(TWO_PI_I, 1.0, [0.01, 0.1], [20], 10, 0)
    with pytest.raises(ValueError):
        density_scan(TWO_PI_I, 1.0, [0.01], [40, 20], 10, 0)
    with pytest.raises(ValueError):
        density_scan(TWO_PI_I, 0.0, [0.01], [20], 10, 0)


def test_report_is_identical_across_thread_counts():
    args = (TWO_PI_I, 1.0, [0.05, 0.01], [10, 20, 40], 3000, 5)
    a = density_scan(*args, threads=1)
    b = density_scan(*args, threads=3)
    assert a.cells == b.cells
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())


def test_counts_sum_and_budget_monotone():
    rep = density_scan(TWO_PI_I, 1.0, [0.1, 0.01], [4, 6, 8, 12], 2000, 9)
    for row in rep.cells:
        for cell in row:
            assert _class_counts(cell) == rep.samples
    assert np.all(np.diff(rep.candidate_fraction(), axis=1) <= 0)


@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 0.5), st.floats(0.2, 2.0))
@settings(max_examples=15)
def test_candidate_fraction_never_grows_with_budget(seed, r, delta):
    rep = density_scan(TWO_PI_I, delta, [r], [5, 10, 30], 200, seed)
    assert np.all(np.diff(rep.candidate_fraction(), axis=1) <= 0)


def test_cells_match_serial_reclassification():
    samples, seed, r = 4000, 42, 0.01
    budgets = [10, 40]
    rep = density_scan(TWO_PI_I, 1.0, [r], budgets, samples, seed, threads=2)
    lams = sample_points(TWO_PI_I, r, samples, seed)
    for j, b in enumerate(budgets):
        full = {k: 0 for k in ("attracting", "escaping", "nr_candidate", "undecided")}
        for lam in lams:
            full[classify_parameter(complex(lam), EscapePolicy(max_iter=b), 1.0).tag] += 1
        cell = rep.cells[0][j]
        assert cell["n_attracting"] == full["attracting"]
        assert cell["n_escaping"] == full["escaping"]
        assert cell["n_candidate"] == full["nr_candidate"]
        assert cell["n_undecided"] == full["undecided"]


def test_samples_are_in_the_disk_and_shared_across_radii():
    a = sample_points(TWO_PI_I, 0.1, 200, 3)
    b = sample_points(TWO_PI_I, 0.01, 200, 3)
    assert np.all(np.abs(a - TWO_PI_I) < 0.1)
    assert np.allclose((a - TWO_PI_I) / 10, b - TWO_PI_I, rtol=0, atol=1e-15)


def test_csv_and_json(tmp_path):
    rep = density_scan(TWO_PI_I, 1.0, [0.01], [10, 20], 50, 0)
    p = tmp_path / "d.csv"
    rep.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "radius,budget_10,budget_20" and len(lines) == 2
    j = rep.to_json()
    assert j["annulus"] == {"inner": 0.25, "outer": 1.0}


def test_binomial_stderr():
    assert binomial_stderr(0.5, 100) == pytest.approx(0.05)
    assert binomial_stderr(0.0, 100) == 0
