import math

import numpy as np
from hypothesis import given, settings, strategies as st

from excited_bm.criteria import Verdict, big_h, classify
from excited_bm.ensemble import mean_se
from excited_bm.excitation import eval_h, eval_phi, make_profile, reflected

heights = st.floats(-5.0, 5.0, allow_nan=False)


@st.composite
def piecewise(draw):
    n = draw(st.integers(1, 5))
    gaps = draw(st.lists(st.floats(0.05, 2.0), min_size=n, max_size=n))
    hs = draw(st.lists(heights, min_size=n, max_size=n))
    return make_profile("piecewise_cookies", bounds=list(np.cumsum(gaps)), heights=hs)


@settings(max_examples=60, deadline=None)
@given(piecewise(), st.floats(0.0, 20.0))
def test_h_lipschitz_in_local_time(p, l):
    assert eval_h(p, 0.0, 0.0) == 0.0
    assert abs(eval_h(p, 0.0, l)) <= p.bound * l * (1 + 1e-12) + 1e-15
    assert abs(eval_phi(p, 0.0, l)) <= p.bound


@settings(max_examples=40, deadline=None)
@given(piecewise(), st.floats(0.01, 50.0), st.floats(0.01, 50.0))
def test_big_h_monotone_for_nonnegative(p, x, y):
    if p.nonnegative and x < y:
        assert big_h(p, x) <= big_h(p, y) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 8.0).filter(lambda d: min(abs(d - k) for k in (1, 2, 4)) > 0.05))
def test_mirror_and_band_for_cookies(d):
    p = make_profile("single_cookie", delta=d)
    r, q = classify(p, with_sigma=False), classify(reflected(p), with_sigma=False)
    if d < 1:
        assert r.verdict is q.verdict is Verdict.RECURRENT
    else:
        assert r.verdict is Verdict.TRANSIENT_RIGHT and q.verdict is Verdict.TRANSIENT_LEFT
        assert (r.speed > 0) == (d > 2)
        assert q.speed == -r.speed


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50), st.floats(-1e3, 1e3))
def test_mean_se_shift_equivariant(xs, c):
    m, se = mean_se(xs)
    m2, se2 = mean_se([x + c for x in xs])
    assert math.isclose(m2, m + c, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(se2, se, rel_tol=1e-6, abs_tol=1e-9)
