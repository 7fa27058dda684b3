import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from netcpd import DetectionRecord, ari, ccd_dnf, rate_rmse


def test_ari_perfect_and_permuted():
    a = np.array([0, 0, 1, 1, 2, 2])
    assert ari(a, a) == 1.0
    assert ari(a, 2 - a) == 1.0                       # label permutation
    assert ari(a, np.array([0, 0, 0, 0, 0, 0])) != 1.0


def test_ari_single_cluster_both():
    assert ari(np.zeros(5, dtype=int), np.zeros(5, dtype=int)) == 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_ari_matches_sklearn(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(4, 40)
    a = rng.integers(0, 4, n)
    b = rng.integers(0, 4, n)
    assert ari(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_ari_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 3, 20)
    b = rng.integers(0, 3, 20)
    perm = rng.permutation(3)
    assert ari(a, b) == pytest.approx(ari(a, perm[b]), abs=1e-12)


KEY = ("rate", 0, 0)


def test_ccd_dnf_all_matched():
    record = DetectionRecord([(3.0, KEY)], [(3.2, KEY)])
    ccd, dnf, per_key = ccd_dnf(record, horizon=6.0)
    assert (ccd, dnf) == (1.0, 1.0)
    assert per_key[KEY] == {"C": 1, "D": 1, "T": 1}


def test_ccd_dnf_no_detections():
    record = DetectionRecord([(3.0, KEY)], [])
    ccd, dnf, _ = ccd_dnf(record, horizon=6.0)
    assert ccd == 0.0
    assert dnf == 1.0          # no detections, none false


def test_ccd_dnf_false_alarm_only():
    record = DetectionRecord([(3.0, KEY)], [(1.0, KEY)])
    ccd, dnf, _ = ccd_dnf(record, horizon=6.0)
    assert (ccd, dnf) == (0.0, 0.0)


def test_flag_after_missed_change_counts_for_latest():
    # two changes; single flag after the second is a correct detection of
    # the second, the first is missed
    record = DetectionRecord([(3.0, KEY), (3.2, KEY)], [(3.5, KEY)])
    ccd, dnf, _ = ccd_dnf(record, horizon=6.0)
    assert ccd == 0.5
    assert dnf == 1.0


def test_only_first_flag_in_window_matches():
    record = DetectionRecord([(3.0, KEY)], [(3.2, KEY), (3.4, KEY)])
    ccd, dnf, _ = ccd_dnf(record, horizon=6.0)
    assert ccd == 1.0
    assert dnf == 0.5


def test_keys_are_independent():
    other = ("rate", 1, 1)
    record = DetectionRecord([(3.0, KEY)], [(3.2, other)])
    ccd, dnf, _ = ccd_dnf(record, horizon=6.0)
    assert (ccd, dnf) == (0.0, 0.0)


def test_ccd_dnf_monotone_in_correct_detections():
    base = DetectionRecord([(3.0, KEY), (4.0, KEY)], [(3.2, KEY)])
    more = DetectionRecord([(3.0, KEY), (4.0, KEY)], [(3.2, KEY), (4.2, KEY)])
    c0, d0, _ = ccd_dnf(base, horizon=6.0)
    c1, d1, _ = ccd_dnf(more, horizon=6.0)
    assert c1 >= c0 and d1 >= d0


def test_rate_rmse_excludes_burn_in():
    mean = np.zeros((10, 1, 1))
    truth = np.ones((10, 1, 1))
    mean[:5] = 100.0           # garbage inside burn-in must not count
    rmse = rate_rmse(mean, truth, burn_in=5)
    assert rmse[0, 0] == pytest.approx(1.0)
