from decimal import Decimal, localcontext

import pytest
from pydantic import ValidationError

from fairsearch.data import ImbalanceProfile, ProfileKind, class_counts
from fairsearch.data.profiles import with_base_count


def test_balance():
    profile = ImbalanceProfile(base_count=40, num_classes=3)
    assert class_counts(profile) == [40, 40, 40]


def test_step_scales_the_tail():
    profile = ImbalanceProfile(
        kind=ProfileKind.STEP, mu=0.1, base_count=500, num_classes=5
    )
    assert class_counts(profile) == [500, 500, 500, 50, 50]


def test_exponential_endpoints():
    profile = ImbalanceProfile(
        kind=ProfileKind.EXPONENTIAL, mu=0.01, base_count=5000
    )
    counts = class_counts(profile)
    assert counts[0] == 5000
    assert counts[-1] == 50
    assert counts == sorted(counts, reverse=True)


def test_exponential_is_floored_with_minimum_one():
    profile = ImbalanceProfile(
        kind=ProfileKind.EXPONENTIAL, mu=0.001, base_count=10, num_classes=4
    )
    assert class_counts(profile) == [10, 1, 1, 1]


def test_mu_one_is_balanced():
    for kind in ProfileKind:
        profile = ImbalanceProfile(kind=kind, mu=1.0, base_count=7)
        assert class_counts(profile) == [7] * 10


@pytest.mark.parametrize("mu", [0.0, -0.5, 1.5])
def test_rejects_mu_outside_range(mu):
    with pytest.raises(ValidationError):
        ImbalanceProfile(mu=mu)


def test_with_base_count_keeps_shape():
    profile = ImbalanceProfile(kind=ProfileKind.STEP, mu=0.5, base_count=8)
    scaled = with_base_count(profile, 100)
    assert scaled.kind == ProfileKind.STEP
    assert scaled.mu == 0.5
    assert class_counts(scaled)[-1] == 50


def test_exponential_matches_decimal_oracle():
    profile = ImbalanceProfile(kind=ProfileKind.EXPONENTIAL, mu=0.1)
    with localcontext() as ctx:
        ctx.prec = 50
        expected = [
            int(Decimal(5000) * Decimal("0.1") ** (Decimal(i) / 9))
            for i in range(10)
        ]
    assert class_counts(profile) == expected
    assert expected[0] == 5000
    assert expected[-1] == 500


def test_step_with_strong_imbalance():
    profile = ImbalanceProfile(kind=ProfileKind.STEP, mu=0.01)
    assert class_counts(profile) == [5000] * 5 + [50] * 5
