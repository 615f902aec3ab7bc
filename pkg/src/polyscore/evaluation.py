"""PCC/MSE metrics, score scaling, rater aggregation and the inter-rater
upper bound."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import METRICS
from .errors import UndefinedCorrelationError, ValidationError


def pcc(x, y):
    """Pearson correlation; zero variance in either input is an error."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pcc needs two 1-D sequences of equal length")
    if x.size < 2:
        raise ValueError("pcc needs at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined: an input has zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def mse(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise ValueError("mse of empty sequences")
    return float(np.mean((x - y) ** 2))


def rescale(s, scale_min, scale_max):
    """Map ``[scale_min, scale_max]`` linearly onto ``[-1, 1]``."""
    return 2.0 * (np.asarray(s, dtype=np.float64) - scale_min) / (scale_max - scale_min) - 1.0


def backscale(r, scale_min, scale_max):
    return (np.asarray(r, dtype=np.float64) + 1.0) * (scale_max - scale_min) / 2.0 + scale_min


def aggregate_raters(scores, mode="mean"):
    """Element-wise mean or median over raters.

    ``scores`` is a list of per-rater score lists, all the same length.
    """
    if len(scores) < 1:
        raise ValueError("need at least one rater")
    lengths = {len(r) for r in scores}
    if len(lengths) != 1:
        raise ValidationError(f"ragged rater lists (lengths {sorted(lengths)})")
    arr = np.asarray(scores, dtype=np.float64)
    if mode == "mean":
        return arr.mean(axis=0)
    if mode == "median":
        return np.median(arr, axis=0)
    raise ValueError(f"aggregation mode must be 'mean' or 'median', not {mode!r}")


def interrater_upperbound(scores, mode="mean"):
    """Mean over raters of PCC(rater, aggregate of the remaining raters)."""
    if len(scores) < 3:
        raise ValueError("inter-rater upper bound needs at least 3 raters")
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError("ragged rater lists")
    vals = []
    for i in range(arr.shape[0]):
        rest = np.delete(arr, i, axis=0)
        vals.append(pcc(arr[i], aggregate_raters(rest, mode)))
    return float(np.mean(vals))


@dataclass
class MetricReport:
    metrics: dict
    n: int
    mode: str
    per_utterance: list = field(default_factory=list, repr=False)

    def pcc(self, metric):
        return self.metrics[metric]["pcc"]

    def mse(self, metric):
        return self.metrics[metric]["mse"]

    def to_dict(self):
        return {"n": self.n, "mode": self.mode, "metrics": self.metrics}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format_table(self):
        lines = [f"{'metric':<15} {'MSE':>8} {'PCC':>8}", "-" * 33]
        for m, r in self.metrics.items():
            p = "undef" if r["pcc"] is None else f"{r['pcc']:.3f}"
            lines.append(f"{m:<15} {r['mse']:>8.3f} {p:>8}")
        lines.append(f"n={self.n} aggregation={self.mode}")
        return "\n".join(lines)


def report_from_predictions(ids, preds, targets, metrics=METRICS, mode="mean"):
    """Build a report from original-scale predictions/targets of shape (N, M)."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    out = {}
    for j, m in enumerate(metrics):
        entry = {"mse": mse(preds[:, j], targets[:, j]), "pcc": None}
        try:
            entry["pcc"] = pcc(preds[:, j], targets[:, j])
        except UndefinedCorrelationError as exc:
            entry["error"] = str(exc)
        out[m] = entry
    per_utt = [
        {"id": uid, "metric": m, "prediction": float(preds[i, j]), "target": float(targets[i, j])}
        for i, uid in enumerate(ids)
        for j, m in enumerate(metrics)
    ]
    return MetricReport(out, len(ids), mode, per_utt)


def evaluate(model, examples, mode="mean", batch_size=64):
    """Back-scale model predictions to each item's rater scale and score them.

    ``examples`` carry targets aggregated under ``mode``; the mode is only
    recorded in the report.
    """
    if not examples:
        raise ValueError("nothing to evaluate")
    pred = model.predict([e.features for e in examples], [e.language for e in examples], batch_size)
    back = np.stack([backscale(p, e.scale_min, e.scale_max) for p, e in zip(pred, examples)])
    targets = np.stack([e.raw_target for e in examples])
    return report_from_predictions([e.id for e in examples], back, targets, model.metrics, mode)


def mean_pcc(report):
    vals = [r["pcc"] for r in report.metrics.values()]
    if any(v is None for v in vals):
        raise UndefinedCorrelationError("a metric has undefined correlation")
    return float(np.mean(vals))
