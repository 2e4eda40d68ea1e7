import math

import numpy as np
import pytest

from excited_bm._parallel import derive_stream, run_indexed
from excited_bm.criteria import PreconditionError
from excited_bm.ensemble import (RESULT_COLUMNS, append_results_csv, ks_2samp_critical, mean_se, se_scaling,
                                 verify_besq, verify_clt, verify_d_infty, verify_drift_identity, verify_duality,
                                 verify_lln)
from excited_bm.excitation import make_profile
from excited_bm.sde_sim import SimConfig, make_generator

C3 = make_profile("single_cookie", delta=3.0)
FAST = SimConfig(dt=1e-3, t_max=200.0)


def test_derive_stream_reproducible_and_independent():
    a = make_generator(derive_stream(1, 0)).standard_normal(1_000_000)
    b = make_generator(derive_stream(1, 0)).standard_normal(1_000_000)
    c = make_generator(derive_stream(1, 1)).standard_normal(1_000_000)
    assert np.array_equal(a, b)
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.003
    with pytest.raises(ValueError):
        derive_stream(-1, 0)


def test_run_indexed_order_independent_of_jobs():
    f = lambda i: make_generator(derive_stream(3, i)).random()
    assert run_indexed(f, 50, 1) == run_indexed(f, 50, 4)


def test_mean_se():
    m, se = mean_se([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5
    assert se == pytest.approx(math.sqrt(5 / 3 / 4))
    with pytest.raises(ValueError):
        mean_se([1.0])


def test_drift_identity_small():
    s = verify_drift_identity(C3, 1.0, 200, FAST, seed=0)
    assert s.passed and s.details["n_failed"] == 0
    assert verify_drift_identity(C3, 0.0, 10).estimate == 0.0


def test_results_independent_of_jobs():
    a = verify_drift_identity(C3, 1.0, 40, FAST, seed=2, jobs=1)
    b = verify_drift_identity(C3, 1.0, 40, FAST, seed=2, jobs=3)
    assert a.estimate == b.estimate and a.se == b.se


def test_d_infty_preconditions_and_small_run():
    with pytest.raises(PreconditionError):
        verify_d_infty(make_profile("single_cookie", delta=0.0), 10)
    s = verify_d_infty(C3, 200, FAST, seed=1, M=10.0, ks=(2,))
    assert set(s.details["per_k"]) == {"0", "2"}
    assert abs(s.estimate - 1.0) < 0.3


def test_lln_small():
    s = verify_lln(C3, [5.0, 20.0], 200, FAST, seed=0)
    assert s.details["dispersion_shrinks"]
    # short horizon and coarse dt both bias X_t/t upward; the full-scale check lives in the acceptance suite
    assert abs(s.estimate - 2.46184) < 0.15 * 2.46184


def test_clt_preconditions():
    with pytest.raises(PreconditionError):
        verify_clt(C3, 10.0, 100)
    with pytest.raises(ValueError):
        verify_clt(make_profile("single_cookie", delta=6.0), 10.0, 1)


def test_duality_small():
    s = verify_duality(C3, 5.0, [1.0], 100, FAST, seed=0)
    assert s.details["critical_value"] == pytest.approx(ks_2samp_critical(100, 100, 0.05))
    assert 0 <= s.estimate <= 1


def test_besq_verifier():
    s = verify_besq((1.0,), 4000, seed=0)
    assert s.passed


def test_se_scaling():
    run = lambda n, seed: verify_drift_identity(C3, 1.0, n, FAST, seed=seed)
    r = se_scaling(run, 400, seed=3, tol=0.25)
    assert r["pass"], r


def test_append_results_csv(tmp_path):
    s = verify_drift_identity(C3, 0.5, 20, FAST, seed=0)
    out = tmp_path / "r.csv"
    append_results_csv([s], out)
    append_results_csv([s], out)
    rows = out.read_text().splitlines()
    assert rows[0] == ",".join(RESULT_COLUMNS) and len(rows) == 3
