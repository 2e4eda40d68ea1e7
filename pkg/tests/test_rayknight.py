import math

import numpy as np
import pytest
from scipy import stats

from excited_bm.criteria import PreconditionError
from excited_bm.excitation import make_profile
from excited_bm.rayknight import (besq2_exact, compare_invariant, sample_invariant, simulate_z, terminal_samples,
                                  write_samples_csv, write_zpath_csv)

ZERO = make_profile("single_cookie", delta=0.0)
C3 = make_profile("single_cookie", delta=3.0)


def test_positivity_and_shape():
    zp = simulate_z(C3, 5.0, dx=1e-3, seed=1)
    assert zp.z.size == 5001 and zp.x[-1] == pytest.approx(5.0)
    assert zp.z[0] == 0.0 and np.all(zp.z >= 0)
    # strong drift away from 0 (h(0) = 0 < 1): the path leaves the entrance boundary
    assert zp.z[1] > 0


def test_empty_and_invalid():
    assert terminal_samples(C3, 1.0, 0).size == 0
    with pytest.raises(ValueError):
        simulate_z(C3, 1.0005, dx=1e-3)
    with pytest.raises(ValueError):
        simulate_z(C3, -1.0)


def test_terminal_matches_path_endpoint():
    from excited_bm._parallel import derive_stream

    t = terminal_samples(C3, 2.0, 3, seed=4)
    for i in range(3):
        assert simulate_z(C3, 2.0, seed=derive_stream(4, i)).z[-1] == t[i]


def test_besq_mean():
    n = 10_000
    s = terminal_samples(ZERO, 1.0, n, dx=1e-3, seed=0)
    assert abs(s.mean() - 2.0) <= 3 * s.std(ddof=1) / math.sqrt(n)


def test_exact_besq_sampler():
    z = besq2_exact([1.0, 3.0], 20_000, seed=2)
    # BESQ(2) from 0 at time x is 2x times an Exp(1) variable
    assert stats.kstest(z[:, 0] / 2.0, "expon").pvalue > 0.01
    assert stats.kstest(z[:, 1] / 6.0, "expon").pvalue > 0.01


def test_compare_invariant_self_test():
    n = 5000
    s = sample_invariant(C3, n, seed=3)
    ks, mean, pi_mean = compare_invariant(s, C3)
    assert ks < stats.kstwo.ppf(0.95, n)
    assert pi_mean == pytest.approx(0.40620, abs=1e-5)
    assert abs(mean - pi_mean) < 0.05 * pi_mean


def test_compare_invariant_rejects_infinite_measure():
    with pytest.raises(PreconditionError):
        compare_invariant([0.1, 0.2], make_profile("single_cookie", delta=0.5))
    with pytest.raises(PreconditionError):
        compare_invariant([0.1, 0.2], make_profile("single_cookie", delta=-3.0))


def test_mean_increases_with_depth():
    n = 3000
    means = [terminal_samples(C3, a, n, seed=5).mean() for a in (0.25, 0.5, 1.0)]
    se = 0.4 / math.sqrt(n)
    assert means[0] <= means[1] + 3 * se and means[1] <= means[2] + 3 * se


def test_inhomogeneous_profile_uses_site(tmp_path):
    p = make_profile("site_cookies", edges=[1.0], masses=[0.0, 3.0])
    zp = simulate_z(p, 2.0, seed=0)
    assert np.all(zp.z >= 0)
    write_zpath_csv(zp, tmp_path / "z.csv")
    write_samples_csv([1.0, 2.0], tmp_path / "s.csv")
    assert (tmp_path / "z.csv").read_text().splitlines()[0] == "x,z"
    assert (tmp_path / "s.csv").read_text().splitlines() == ["z", "1", "2"]
