import math
from dataclasses import dataclass

import numpy as np

from src.application.common.errors import LabelError
from src.application.services.seeds import derive_seed
from src.infrastructure.logging_config import get_logger

logger = get_logger("data.splits")


@dataclass(frozen=True, eq=False)
class LabeledSplit:
    train: np.ndarray
    test: np.ndarray
    fraction: float
    trial_seed: int


def split_labeled(n: int, fraction: float, trial_seed: int) -> LabeledSplit:
    """Seeded permutation; the first round-half-up(fraction * n) indices are the labeled train set."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n_train = math.floor(fraction * n + 0.5)
    if n_train < 1 or n_train >= n:
        raise ValueError(f"fraction {fraction} of {n} points leaves an empty train or test set")
    perm = np.random.default_rng(trial_seed).permutation(n)
    return LabeledSplit(perm[:n_train], perm[n_train:], fraction, trial_seed)


def split_covering_classes(labels: np.ndarray, fraction: float, master_seed: int, trial: int,
                           max_redraws: int = 100) -> LabeledSplit:
    """``split_labeled`` re-drawn with the next seed until every class has a labeled sample."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    for attempt in range(max_redraws + 1):
        label = f"split:{trial}" if attempt == 0 else f"split:{trial}:{attempt}"
        split = split_labeled(labels.size, fraction, derive_seed(master_seed, label))
        missing = np.setdiff1d(classes, labels[split.train])
        if missing.size == 0:
            return split
        logger.warning("Trial %d: class(es) %s absent from the %.0f%% split, re-drawing",
                       trial, missing.tolist(), 100 * fraction)
    raise LabelError(f"no split at fraction {fraction} covers every class after {max_redraws} re-draws")
