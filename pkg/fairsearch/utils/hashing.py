import hashlib
import json
from typing import Any, Iterable

from pydantic import BaseModel

from fairsearch.utils.pydantic import get_model_dump

HASH_LENGTH = 16


def stable_hash(data: Any) -> str:
    """
    Short sha256 of the canonical JSON form of the data

    :param data: Any - JSON compatible structure
    :return: str - first 16 hex characters
    """
    payload = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:HASH_LENGTH]


def model_hash(model: BaseModel, exclude: Iterable[str] = ()) -> str:
    dump = get_model_dump(model)
    for key in exclude:
        dump.pop(key, None)
    return stable_hash(dump)
