import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from explab import _kernels as K
from explab.classify import (
    ClassifySettings, CycleNotFound, NoConvergence, classify_array, classify_parameter,
    detect_attracting_cycle, is_delta_nonrecurrent, newton_refine_cycle,
)
from explab.orbit import EscapePolicy, full_orbit, singular_orbit

OMEGA = 0.5671432904097838  # W(1)
TWO_PI_I = 2j * math.pi


def test_omega_oracle():
    assert abs(float(mpmath.lambertw(1)) - OMEGA) < 1e-16


def test_cycle_lambda_minus_one():
    c = detect_attracting_cycle(-1)
    assert c.period == 1
    assert abs(c.point + OMEGA) < 1e-8 and abs(c.multiplier + OMEGA) < 1e-8


def test_cycle_lambda_point_two():
    # x = 0.2 e^x  <=>  x = -W(-0.2)
    oracle = -float(mpmath.lambertw(-0.2))
    assert abs(oracle - 0.25917110181907377) < 1e-15
    c = detect_attracting_cycle(0.2)
    assert abs(c.point - oracle) < 1e-8 and abs(c.multiplier - c.point) < 1e-10


def test_no_attracting_cycle_at_2pi_i():
    with pytest.raises(CycleNotFound):
        detect_attracting_cycle(TWO_PI_I)


def test_newton_refine_examples():
    c = newton_refine_cycle(-1, -0.5, 1, max_iter=6)
    assert abs(c.point + OMEGA) < 1e-8
    t = 0.5
    c = newton_refine_cycle(t * math.exp(-t), 0.4, 1)
    assert abs(c.point - 0.5) < 1e-10 and abs(c.multiplier - 0.5) < 1e-10
    with pytest.raises(NoConvergence):
        newton_refine_cycle(1, 0.5, 1)
    with pytest.raises(ValueError):
        newton_refine_cycle(1, 0.5, 0)


def test_delta_nonrecurrence_examples():
    assert is_delta_nonrecurrent(full_orbit(1, EscapePolicy(max_iter=10)), 0.5).holds
    assert is_delta_nonrecurrent(singular_orbit(TWO_PI_I), 1.0).holds
    # zeta_1 = -3, zeta_2 = -3 e^-3
    v = is_delta_nonrecurrent(full_orbit(-3), 1.0)
    assert not v.holds and v.violated_at == 2
    with pytest.raises(ValueError):
        is_delta_nonrecurrent(singular_orbit(1), 0.0)


def test_lambda_e_lambda_2pi_i_is_a_two_cycle_away_from_zero():
    lam = complex(mpmath.findroot(lambda l: l * mpmath.exp(l) - 2j * mpmath.pi, 1 + 1j))
    rec = full_orbit(lam, EscapePolicy(max_iter=6))
    assert abs(rec[2] - TWO_PI_I) < 1e-12 and abs(rec[3] - lam) < 1e-12
    assert is_delta_nonrecurrent(rec, 1.0).holds


def test_classify_examples():
    a = classify_parameter(-1)
    assert a.tag == "attracting" and a.cycle.period == 1
    assert classify_parameter(1).tag == "escaping"
    c = classify_parameter(TWO_PI_I, delta=1.0)
    assert c.tag == "nr_candidate" and c.verdict.holds
    assert "caveat" in c.to_json()


def test_real_axis_neighbours_of_one_over_e():
    assert classify_parameter(0.36, EscapePolicy(max_iter=10_000)).tag == "attracting"
    assert classify_parameter(0.38, EscapePolicy(max_iter=10_000)).tag == "escaping"
    assert classify_parameter(1 / math.e, EscapePolicy(max_iter=2000)).tag != "attracting"


@given(st.floats(0.01, 0.36))
@settings(max_examples=50)
def test_real_axis_below_one_over_e_attracts(lam):
    pc = classify_parameter(lam, EscapePolicy(max_iter=10_000))
    assert pc.tag == "attracting" and pc.cycle.period == 1


@given(st.floats(0.375, 3.0))
@settings(max_examples=50)
def test_real_axis_above_one_over_e_escapes(lam):
    assert classify_parameter(lam, EscapePolicy(max_iter=10_000)).tag == "escaping"


lams = st.complex_numbers(min_magnitude=0.01, max_magnitude=5, allow_nan=False,
                          allow_infinity=False)


@given(lams)
def test_period_one_multiplier_is_point(lam):
    pc = classify_parameter(lam)
    if pc.tag == "attracting" and pc.cycle.period == 1:
        assert abs(pc.cycle.multiplier - pc.cycle.point) < 1e-10


@given(lams)
def test_attracting_is_sound(lam):
    pc = classify_parameter(lam)
    if pc.tag != "attracting":
        return
    c = pc.cycle
    assert abs(c.multiplier) < 1 and c.residual < 1e-11
    pts = [c.point]
    for _ in range(c.period - 1):
        pts.append(K.step(lam, pts[-1], K.EVAL_LIMIT)[0])
    rec = full_orbit(lam, EscapePolicy(max_iter=1000, max_period=1))
    z = rec.points[-1]
    for _ in range(10 * c.period):
        z = K.step(lam, z, K.EVAL_LIMIT)[0]
        # cycle points of modulus up to ~1e12 occur; distance is measured relative to them
        assert min(abs(z - p) / max(1.0, abs(p)) for p in pts) < 1e-6


@given(lams, st.floats(0.05, 2.0))
def test_verdict_monotone_in_budget(lam, delta):
    small = is_delta_nonrecurrent(full_orbit(lam, EscapePolicy(max_iter=20)), delta)
    large = is_delta_nonrecurrent(full_orbit(lam, EscapePolicy(max_iter=80)), delta)
    if not small.holds:
        assert not large.holds and large.violated_at == small.violated_at
    if not large.holds:
        assert 1 <= large.violated_at <= 80
        assert np.abs(full_orbit(lam, EscapePolicy(max_iter=80)).points[large.violated_at]) < delta


@given(lams)
def test_classification_is_deterministic_and_matches_array(lam):
    a = classify_parameter(lam)
    b = classify_parameter(lam)
    assert a == b
    tags, periods, esc, _ = classify_array(np.array([lam]), ClassifySettings(EscapePolicy(), 1.0))
    assert a.tag == {K.TAG_ATTRACTING: "attracting", K.TAG_ESCAPING: "escaping",
                     K.TAG_CANDIDATE: "nr_candidate", K.TAG_UNDECIDED: "undecided"}[tags[0]]
    if a.tag == "attracting":
        assert a.cycle.period == periods[0]
    if a.tag == "escaping":
        assert a.escape_index == esc[0]


@given(lams)
def test_candidate_requires_holding_verdict(lam):
    pc = classify_parameter(lam, EscapePolicy(max_iter=60))
    if pc.tag == "nr_candidate":
        assert pc.verdict.holds


def test_json_field_names():
    assert classify_parameter(-1).to_json()["tag"] == "attracting"
    assert classify_parameter(1).to_json()["escape_index"] >= 1
