"""Versioned model files: numpy arrays in an npz archive with a TOML header."""
from typing import Any, Dict, Mapping

import numpy as np
import toml

from hyperspot.helpers import DataError
from hyperspot.learners.base import LearnerKind, LearnerModel, LearnerSpec
from hyperspot.learners.boosting import AdaBoostModel
from hyperspot.learners.forest import RandomForestModel
from hyperspot.learners.logistic import LogisticModel

FORMAT_VERSION = 1
HEADER = "header"

MODEL_TYPES = {
    LearnerKind.RANDOM_FOREST: RandomForestModel,
    LearnerKind.ADABOOST: AdaBoostModel,
    LearnerKind.LOGISTIC_L1: LogisticModel,
    LearnerKind.LOGISTIC_L2: LogisticModel,
}


def spec_header(spec: LearnerSpec) -> Dict[str, Any]:
    """Describe a learner spec with TOML types.

    TOML has no null, so the names of unset values are listed under "unset".
    """
    return {
        "kind": spec.kind.value,
        "seed": spec.seed,
        "hyperparams": {
            name: value for name, value in spec.hyperparams.items() if value is not None
        },
        "unset": [name for name, value in spec.hyperparams.items() if value is None],
    }


def spec_from_header(header: Mapping[str, Any]) -> LearnerSpec:
    """Restore a learner spec from its header description."""
    hyperparams = dict(header.get("hyperparams", {}))
    hyperparams.update({name: None for name in header.get("unset", [])})
    return LearnerSpec(
        kind=LearnerKind(header["kind"]),
        hyperparams=hyperparams,
        seed=int(header["seed"]),
    )


def text_array(text: str) -> np.ndarray:
    """Store text as a unicode array, which npz files hold without pickling."""
    return np.array(text)


def model_to_arrays(model: LearnerModel, prefix: str = "") -> Dict[str, np.ndarray]:
    """Get the arrays and the header of a model, all names starting with the prefix."""
    header = spec_header(model.spec)
    header["format_version"] = FORMAT_VERSION
    header["feature_names"] = list(model.feature_names)
    arrays = {f"{prefix}{name}": values for name, values in model.arrays().items()}
    arrays[f"{prefix}{HEADER}"] = text_array(toml.dumps(header))
    return arrays


def model_from_arrays(
    arrays: Mapping[str, np.ndarray], prefix: str = ""
) -> LearnerModel:
    """Restore a model from the arrays written by model_to_arrays."""
    if f"{prefix}{HEADER}" not in arrays:
        raise DataError(f"no model header found under '{prefix}'")
    header = toml.loads(str(arrays[f"{prefix}{HEADER}"]))
    if header.get("format_version") != FORMAT_VERSION:
        version = header.get("format_version")
        raise DataError(f"unsupported model format version {version}")

    spec = spec_from_header(header)
    own = {
        name[len(prefix):]: values
        for name, values in arrays.items()
        if name.startswith(prefix) and name != f"{prefix}{HEADER}"
    }
    return MODEL_TYPES[spec.kind].from_arrays(spec, header["feature_names"], own)


def read_archive(path: str) -> Dict[str, np.ndarray]:
    """Read all arrays of an npz archive."""
    try:
        with np.load(path, allow_pickle=False) as archive:
            return {name: archive[name] for name in archive.files}
    except (OSError, ValueError) as error:
        raise DataError(f"cannot read model file {path}: {error}")


def save_model(model: LearnerModel, path: str) -> None:
    """Write a model to an npz file."""
    np.savez(path, **model_to_arrays(model))


def load_model(path: str) -> LearnerModel:
    """Read a model written by save_model."""
    return model_from_arrays(read_archive(path))
