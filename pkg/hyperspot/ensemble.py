"""The hyper-ensemble: base learners trained on independent random under-samples.

Every member sees all minority rows and an equally large random draw of majority rows;
the ensemble scores a row with the mean of the member probabilities.
"""
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import toml
from joblib import Parallel, delayed

from hyperspot import logger
from hyperspot.dataset import SpatioTemporalFrame
from hyperspot.helpers import ArityError, ConfigError, DataError
from hyperspot.learners import LearnerModel, LearnerSpec, fit
from hyperspot.learners.serialization import (
    FORMAT_VERSION,
    model_from_arrays,
    model_to_arrays,
    read_archive,
    spec_from_header,
    spec_header,
    text_array,
)
from hyperspot.resampling import random_under_sample_indices

ENSEMBLE_HEADER = "ensemble"

MASK_64 = (1 << 64) - 1


def derive_seed(master: int, index: int) -> int:
    """Derive the seed of a member from the master seed with a splitmix64 step.

    The result is a non-negative 63 bit integer.
    """
    z = (int(master) + (int(index) + 1) * 0x9E3779B97F4A7C15) & MASK_64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK_64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK_64
    z ^= z >> 31
    return z >> 1


@dataclass(frozen=True, eq=False)
class HyperEnsemble:
    """Members trained on balanced under-samples, in member order."""

    members: Tuple[LearnerModel, ...]
    phi: int
    base_spec: LearnerSpec
    seeds: Tuple[int, ...]

    def __post_init__(self) -> None:
        """Validate the members."""
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "seeds", tuple(int(seed) for seed in self.seeds))
        if self.phi < 1:
            raise ConfigError(f"phi must be at least 1, got {self.phi}")
        if len(self.members) != self.phi or len(self.seeds) != self.phi:
            raise DataError(
                f"an ensemble with phi {self.phi} got {len(self.members)} members "
                f"and {len(self.seeds)} seeds"
            )
        arities = {member.n_features for member in self.members}
        if len(arities) > 1:
            raise DataError("the ensemble members disagree on the feature arity")

    @property
    def feature_names(self) -> Tuple[str, ...]:
        """The feature names shared by the members."""
        return self.members[0].feature_names

    @property
    def n_features(self) -> int:
        """The feature arity of the members."""
        return self.members[0].n_features

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Score every row with the mean member probability."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[np.newaxis, :]
        if X.shape[1] != self.n_features:
            raise ArityError(self.n_features, X.shape[1])
        total = np.zeros(len(X))
        for member in self.members:
            total += member.predict_proba(X)
        return np.clip(total / self.phi, 0.0, 1.0)

    predict_proba = predict


def fit_under_sampled(
    spec: LearnerSpec,
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    feature_names: Optional[Sequence[str]] = None,
    n_jobs: Optional[int] = 1,
) -> LearnerModel:
    """Fit a learner on one balanced random under-sample; the seed drives both steps."""
    rows = random_under_sample_indices(y, seed)
    return fit(
        spec.with_seed(seed),
        X[rows],
        y[rows],
        feature_names=feature_names,
        n_jobs=n_jobs,
    )


def train_hyper_ensemble(
    train: SpatioTemporalFrame,
    phi: int,
    base_spec: LearnerSpec,
    seed: int = 0,
    n_jobs: Optional[int] = 1,
) -> HyperEnsemble:
    """Train phi members on independent under-samples of the training frame.

    Member i uses ``derive_seed(seed, i)``, so the result does not depend on n_jobs.
    """
    if phi < 1:
        raise ConfigError(f"phi must be at least 1, got {phi}")
    X, y = train.xy()
    seeds = [derive_seed(seed, index) for index in range(phi)]
    logger.debug(f"Training {phi} members of {base_spec.describe()}.")
    members: List[LearnerModel] = Parallel(n_jobs=n_jobs)(
        delayed(fit_under_sampled)(base_spec, X, y, member_seed, train.feature_names)
        for member_seed in seeds
    )
    return HyperEnsemble(
        members=tuple(members), phi=phi, base_spec=base_spec, seeds=tuple(seeds)
    )


def predict(ensemble: HyperEnsemble, X: np.ndarray) -> np.ndarray:
    """Score rows with the mean probability of the ensemble members."""
    return ensemble.predict(X)


def ensemble_to_arrays(ensemble: HyperEnsemble) -> Dict[str, np.ndarray]:
    """Get the header and the member arrays of an ensemble."""
    header = {
        "format_version": FORMAT_VERSION,
        "phi": ensemble.phi,
        "seeds": list(ensemble.seeds),
        "base_spec": spec_header(ensemble.base_spec),
    }
    arrays = {ENSEMBLE_HEADER: text_array(toml.dumps(header))}
    for index, member in enumerate(ensemble.members):
        arrays.update(model_to_arrays(member, prefix=f"member{index}/"))
    return arrays


def ensemble_from_arrays(arrays: Mapping[str, np.ndarray]) -> HyperEnsemble:
    """Restore an ensemble from the arrays written by ensemble_to_arrays."""
    if ENSEMBLE_HEADER not in arrays:
        raise DataError("no ensemble header found")
    header = toml.loads(str(arrays[ENSEMBLE_HEADER]))
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"unsupported ensemble format version {header.get('format_version')}"
        )
    phi = int(header["phi"])
    return HyperEnsemble(
        members=tuple(
            model_from_arrays(arrays, prefix=f"member{index}/") for index in range(phi)
        ),
        phi=phi,
        base_spec=spec_from_header(header["base_spec"]),
        seeds=tuple(header["seeds"]),
    )


def save_ensemble(ensemble: HyperEnsemble, path: str) -> None:
    """Write an ensemble to a single npz file."""
    np.savez(path, **ensemble_to_arrays(ensemble))


def load_ensemble(path: str) -> HyperEnsemble:
    """Read an ensemble written by save_ensemble."""
    return ensemble_from_arrays(read_archive(path))
