import math
from enum import Enum
from typing import List

from pydantic import BaseModel, Field

from fairsearch.exceptions import InvalidArgument


class ProfileKind(str, Enum):
    BALANCE = "balance"
    STEP = "step"
    EXPONENTIAL = "exponential"


class ImbalanceProfile(BaseModel):
    """
    Per-class sample counts of a long-tailed dataset. ``mu`` is the
    imbalance factor: the smaller, the heavier the tail.
    """

    kind: ProfileKind = ProfileKind.BALANCE
    mu: float = Field(1.0, gt=0, le=1)
    base_count: int = Field(5000, gt=0)
    num_classes: int = Field(10, ge=2)


def _floor_count(value: float) -> int:
    # products that are integral in exact arithmetic must not lose one
    return max(1, math.floor(value + 1e-9))


def class_counts(profile: ImbalanceProfile) -> List[int]:
    """
    Sample count per class index

    balance keeps ``base_count`` everywhere, step scales the latter half
    of the classes (index >= ceil(C/2)) by mu, exponential gives class i
    ``base_count * mu ** (i / (C - 1))``. Counts are floored, minimum 1.

    :param profile: ImbalanceProfile
    :return: List[int] - nonincreasing counts
    """
    if profile.mu <= 0:
        raise InvalidArgument(f"imbalance factor mu={profile.mu} must be > 0")
    if profile.num_classes < 2:
        raise InvalidArgument(
            f"num_classes={profile.num_classes}, profiles need at least 2"
        )
    classes = profile.num_classes
    base = profile.base_count
    if profile.kind == ProfileKind.BALANCE:
        return [base] * classes
    if profile.kind == ProfileKind.STEP:
        head = (classes + 1) // 2
        return [
            base if index < head else _floor_count(base * profile.mu)
            for index in range(classes)
        ]
    return [
        _floor_count(base * profile.mu ** (index / (classes - 1)))
        for index in range(classes)
    ]


def with_base_count(
    profile: ImbalanceProfile, base_count: int
) -> ImbalanceProfile:
    return ImbalanceProfile(
        kind=profile.kind,
        mu=profile.mu,
        base_count=base_count,
        num_classes=profile.num_classes,
    )
