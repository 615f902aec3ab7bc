from dataclasses import dataclass

import numpy as np

from ..corpus import METRICS
from ..evaluation import aggregate_raters, rescale


@dataclass(frozen=True, eq=False)
class Example:
    """One training/evaluation item: features plus aggregated, rescaled target."""

    id: str
    language: str
    features: np.ndarray
    target: np.ndarray
    raw_target: np.ndarray
    scale_min: float
    scale_max: float


def make_examples(utterances, feature_mats, metrics=METRICS, mode="mean"):
    """Pair utterances with their feature matrices (matched by position).

    Targets aggregate the raters per ``mode`` (mean or median) and are then
    rescaled into [-1, 1].
    """
    if len(utterances) != len(feature_mats):
        raise ValueError("utterance and feature counts differ")
    out = []
    for utt, fm in zip(utterances, feature_mats):
        if fm.utt_id is not None and fm.utt_id != utt.id:
            raise ValueError(f"feature matrix {fm.utt_id!r} paired with utterance {utt.id!r}")
        s = utt.scores
        raw = np.array([aggregate_raters([[r] for r in s.raters(m)], mode)[0] for m in metrics])
        out.append(
            Example(utt.id, utt.language, fm.rows, rescale(raw, s.scale_min, s.scale_max), raw, s.scale_min, s.scale_max)
        )
    return out
