"""JSON save/load for fitted models of every learner."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import DataError
from .forest import ForestModel
from .glm_linear import LinearModel
from .glm_spline import SplineModel

_LOADERS = {"linear": LinearModel, "spline": SplineModel, "forest": ForestModel}


def model_to_json(model) -> str:
    return json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def model_from_json(text: str):
    try:
        d = json.loads(text)
        cls = _LOADERS[d["learner"]]
        return cls.from_dict(d)
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"not a valid model file: {exc}") from None


def save_model(model, path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path):
    return model_from_json(Path(path).read_text(encoding="utf-8"))
