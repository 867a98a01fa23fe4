import json
from typing import Any, Dict, Type, TypeVar

import pydantic
from pydantic import BaseModel

IS_PYDANTIC_V2 = int(pydantic.VERSION.split(".")[0]) >= 2

ModelType = TypeVar("ModelType", bound=BaseModel)


def parse_model(model_type: Type[ModelType], data: Any) -> ModelType:
    if IS_PYDANTIC_V2:
        return model_type.model_validate(data)
    else:
        return model_type.parse_obj(data)


def get_model_dump(model: BaseModel, by_alias: bool = False) -> Dict:
    """
    Plain python dump of a model, enums turned into their values

    :param model: BaseModel - model to dump
    :param by_alias: bool - use field aliases as keys
    :return: Dict
    """
    if IS_PYDANTIC_V2:
        return model.model_dump(mode="json", by_alias=by_alias)
    else:
        return json.loads(model.json(by_alias=by_alias))


def get_model_fields(model):
    if IS_PYDANTIC_V2:
        return model.model_fields
    else:
        return model.__fields__


def copy_model(model: ModelType, update: Dict[str, Any]) -> ModelType:
    if IS_PYDANTIC_V2:
        return model.model_copy(update=update, deep=True)
    else:
        return model.copy(update=update, deep=True)
