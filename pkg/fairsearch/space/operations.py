from enum import Enum
from typing import Sequence, Tuple

from fairsearch.exceptions import InvalidArgument


class OperationKind(str, Enum):
    """
    Candidate operations of a cell edge, in canonical order
    """

    NONE = "none"
    MAX_POOL_3X3 = "max_pool_3x3"
    AVG_POOL_3X3 = "avg_pool_3x3"
    SKIP_CONNECT = "skip_connect"
    SEP_CONV_3X3 = "sep_conv_3x3"
    SEP_CONV_5X5 = "sep_conv_5x5"
    DIL_CONV_3X3 = "dil_conv_3x3"
    DIL_CONV_5X5 = "dil_conv_5x5"


PRIMITIVES: Tuple[OperationKind, ...] = tuple(OperationKind)


class GatingMode(str, Enum):
    SOFTMAX = "softmax"
    SIGMOID = "sigmoid"


class CellKind(str, Enum):
    NORMAL = "normal"
    REDUCE = "reduce"


class DiscretizeRule(str, Enum):
    ARGMAX = "argmax"
    THRESHOLD = "threshold"
    DARTS_TOP2 = "darts-top2"


def canonical_primitives(
    names: Sequence[str],
) -> Tuple[OperationKind, ...]:
    """
    Validate an operation subset and return it in canonical order

    :param names: Sequence[str] - operation names
    :return: Tuple[OperationKind, ...]
    """
    kinds = []
    for name in names:
        try:
            kinds.append(OperationKind(name))
        except ValueError:
            raise InvalidArgument(f"Unknown operation {name!r}")
    if not kinds:
        raise InvalidArgument("At least one operation is required")
    if len(set(kinds)) != len(kinds):
        raise InvalidArgument(f"Duplicate operations in {list(names)}")
    order = {kind: position for position, kind in enumerate(PRIMITIVES)}
    return tuple(sorted(kinds, key=order.__getitem__))
