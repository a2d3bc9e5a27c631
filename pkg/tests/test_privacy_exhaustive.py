import time

import pytest

from quorumvault.errors import BadThreshold, FieldTooLarge
from quorumvault.harness.privacy import (
    FAIL,
    PASS,
    THRESHOLD_REACHED,
    consistency_opening_check,
    mul_views_factored,
    mul_views_naive,
    privacy_check_exhaustive,
    privacy_check_multiplication,
)


def test_honest_five_node_gate_passes():
    verdict = privacy_check_multiplication(7, corrupted=(1, 2), k=3, n=5)
    assert verdict["status"] == PASS


def test_broken_degree_zero_fails():
    verdict = privacy_check_multiplication(7, corrupted=(1, 2), k=3, n=5,
                                           broken_degree_zero=True)
    assert verdict["status"] == FAIL
    assert "marginal" in verdict["detail"] or "differ" in verdict["detail"]


def test_honest_naive_four_node_gate_passes():
    verdict = privacy_check_multiplication(5, corrupted=(1,), k=2, n=4, naive=True)
    assert verdict["status"] == PASS


def test_broken_naive_four_node_gate_fails():
    verdict = privacy_check_multiplication(5, corrupted=(1,), k=2, n=4,
                                           broken_degree_zero=True, naive=True)
    assert verdict["status"] == FAIL


def test_factored_and_naive_agree_where_both_run():
    # 3-node t=1 gate over Z_5: small enough to enumerate both ways
    for broken in (False, True):
        naive = privacy_check_multiplication(5, corrupted=(1,), k=2, n=3,
                                             broken_degree_zero=broken, naive=True)
        factored = privacy_check_multiplication(5, corrupted=(1,), k=2, n=3,
                                                broken_degree_zero=broken, naive=False)
        assert naive["status"] == factored["status"]


def test_threshold_reached_reported_not_leak():
    verdict = privacy_check_exhaustive((1, 2, 3), p=7)
    assert verdict["status"] == THRESHOLD_REACHED


def test_refuses_large_fields():
    with pytest.raises(FieldTooLarge):
        privacy_check_exhaustive((1, 2), p=11)


def test_stated_small_scales_are_impossible():
    # the five-node gate cannot exist over Z_3 or Z_5: not enough nonzero
    # indices; the checker must refuse rather than degrade
    for p in (3, 5):
        with pytest.raises(BadThreshold):
            privacy_check_exhaustive((1, 2), p=p)


def test_view_counts_are_complete_tape_spaces():
    # per input pair the factored form covers exactly (p^t)^2 dealer tapes
    views = mul_views_factored(7, 3, 4, (1, 2), 3, 5)
    assert sum(views.values()) == 49 * 49
    naive = mul_views_naive(5, 2, 3, (1,), 2, 4)
    assert sum(naive.values()) == 5 * 5 * 5 * 5 * 5  # dealer^2 x 3 honest reshares


def test_consistency_opening_private_and_zero():
    verdict = consistency_opening_check(p=7, width=2)
    assert verdict["status"] == PASS


def test_runtime_budget():
    start = time.monotonic()
    assert privacy_check_multiplication(7, (1, 2), 3, 5)["status"] == PASS
    assert privacy_check_multiplication(
        7, (1, 2), 3, 5, broken_degree_zero=True)["status"] == FAIL
    elapsed = time.monotonic() - start
    assert elapsed < 300, f"privacy checks took {elapsed:.1f}s"
