"""MSE training with Adam, plus cross-lingual adaptation and multi-task
training over shared backbones."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError, ValidationError
from .network import ScoringModel, backward, collate, forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 30
    clip: float = 5.0
    seed: int = 0
    val_fraction: float = 0.1
    patience: int = 5
    normalize: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0 or self.batch_size < 1 or self.epochs < 0 or self.clip <= 0 or self.patience < 1:
            raise ValueError("lr/epochs must be >= 0; batch_size, clip and patience must be positive")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")


@dataclass
class TrainResult:
    model: ScoringModel
    curve: list = field(default_factory=list)
    step_losses: list = field(default_factory=list)
    best_epoch: int = -1


def mse_loss(pred, target):
    return float(np.mean((np.asarray(pred) - np.asarray(target)) ** 2))


def loss_and_gradient(model, batch):
    """Batch MSE over examples x metrics and its exact gradient."""
    if not batch:
        raise ValueError("empty batch")
    X, mask = collate([e.features for e in batch])
    T = np.stack([e.target for e in batch])
    Y, cache = forward(model, X, mask, [e.language for e in batch])
    diff = Y - T
    loss = float(np.mean(diff * diff))
    grad = backward(model, cache, Y, 2.0 * diff / diff.size)
    return loss, grad


def gradient(model, batch):
    return loss_and_gradient(model, batch)[1]


class Adam:
    def __init__(self, n, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps

    def step(self, params, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        params -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def clip_global_norm(grad, max_norm):
    norm = float(np.sqrt(grad @ grad))
    if norm > max_norm:
        grad *= max_norm / norm
    return norm


def _split(examples, fraction, rng):
    if fraction <= 0 or len(examples) < 2:
        return list(examples), []
    idx = rng.permutation(len(examples))
    n_val = max(1, int(round(fraction * len(examples))))
    n_val = min(n_val, len(examples) - 1)
    val = [examples[i] for i in sorted(idx[:n_val])]
    train = [examples[i] for i in sorted(idx[n_val:])]
    return train, val


def _check_layout(model, examples):
    for e in examples:
        if e.features.shape[1] != model.input_dim:
            raise ValidationError(
                f"example {e.id}: feature width {e.features.shape[1]} != model input {model.input_dim}"
            )
        if e.target.shape != (len(model.metrics),):
            raise ValidationError(f"example {e.id}: target has {e.target.size} values, model predicts {len(model.metrics)}")


def _mean_loss(model, examples, batch_size):
    if not examples:
        return None
    total = 0.0
    for s in range(0, len(examples), batch_size):
        batch = examples[s : s + batch_size]
        X, mask = collate([e.features for e in batch])
        Y, _ = forward(model, X, mask, [e.language for e in batch])
        T = np.stack([e.target for e in batch])
        total += float(np.sum((Y - T) ** 2))
    return total / (len(examples) * len(model.metrics))


def _fit(model, train_sets, val, cfg, rng, frozen=()):
    """Core loop shared by every training entry point.

    ``train_sets`` maps language -> examples. Each epoch shuffles every
    language's examples into single-language batches and shuffles the
    batch order, so languages interleave in proportion to their sizes.
    """
    frozen_mask = np.zeros(model.params.size, dtype=bool)
    for lang in frozen:
        for part in ("W", "b"):
            frozen_mask[model.slices[f"head.{lang}.{part}"]] = True
    opt = Adam(model.params.size, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    result = TrainResult(model)
    best = None
    best_score = np.inf
    stale = 0
    langs = sorted(train_sets)
    step = 0
    for epoch in range(cfg.epochs):
        batches = []
        for lang in langs:
            ex = train_sets[lang]
            order = rng.permutation(len(ex))
            for s in range(0, len(ex), cfg.batch_size):
                batches.append([ex[i] for i in order[s : s + cfg.batch_size]])
        batch_order = rng.permutation(len(batches))
        losses = []
        for bi in batch_order:
            loss, grad = loss_and_gradient(model, batches[bi])
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi} (step {step})")
            if frozen:
                grad[frozen_mask] = 0.0
            clip_global_norm(grad, cfg.clip)
            opt.step(model.params, grad)
            losses.append(loss)
            result.step_losses.append(loss)
            step += 1
        train_loss = float(np.mean(losses)) if losses else float("nan")
        val_loss = _mean_loss(model, val, 64)
        result.curve.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        log.info("epoch %d train %.5f val %s", epoch, train_loss, "-" if val_loss is None else f"{val_loss:.5f}")
        if val_loss is not None:
            if val_loss < best_score:
                best_score = val_loss
                best = model.params.copy()
                result.best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    if best is not None:
        model.params[...] = best
    else:
        result.best_epoch = len(result.curve) - 1
    return result


def train(model, examples, cfg=TrainConfig()):
    """Train a copy of ``model``; the returned model is the best-validation
    checkpoint (the final one when ``val_fraction`` is 0)."""
    if not examples:
        raise ValueError("empty training set")
    model = model.copy()
    _check_layout(model, examples)
    rng = np.random.default_rng(cfg.seed)
    tr, val = _split(list(examples), cfg.val_fraction, rng)
    if cfg.normalize and not model.normalizer_fitted:
        model.fit_normalizer([e.features for e in tr])
    sets = {}
    for e in tr:
        sets.setdefault(e.language, []).append(e)
    return _fit(model, sets, val, cfg, rng)


def train_multitask(model, datasets, cfg=TrainConfig(), frozen_heads=()):
    """Joint training over ``datasets`` (language -> examples).

    The backbone accumulates gradients from every language; a head only
    sees its own language's batches. Heads named in ``frozen_heads`` stay
    fixed.
    """
    if len(datasets) < 2:
        raise ValueError("multi-task training needs at least two languages")
    for lang, ex in datasets.items():
        if lang not in model.languages:
            raise ValidationError(f"model has no head for language {lang!r}")
        if not ex:
            raise ValueError(f"empty dataset for language {lang!r}")
        if any(e.language != lang for e in ex):
            raise ValidationError(f"dataset {lang!r} holds examples of another language")
    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    sets, val = {}, []
    for lang in sorted(datasets):
        _check_layout(model, datasets[lang])
        tr, va = _split(list(datasets[lang]), cfg.val_fraction, rng)
        sets[lang] = tr
        val.extend(va)
    if cfg.normalize and not model.normalizer_fitted:
        model.fit_normalizer([e.features for ex in sets.values() for e in ex])
    return _fit(model, sets, val, cfg, rng, frozen=tuple(frozen_heads))


def adapt(source, target_language, examples, cfg=TrainConfig(), head_init="zeros", layout=None):
    """Fine-tune a fresh ``target_language`` head plus the source backbone.

    The source's input normalizer is kept, so the target features are seen
    through the statistics the backbone was trained on.
    """
    if layout is not None and source.layout is not None and dict(layout) != source.layout:
        raise ValidationError(f"feature layout {dict(layout)} does not match the source model's {source.layout}")
    if examples:
        _check_layout(source, examples)
    rng = np.random.default_rng(cfg.seed)
    model = ScoringModel(
        source.input_dim, (target_language,), source.hidden, source.layers, source.metrics, source.layout,
        cfg.seed, head_init="zeros", feature_meta=source.feature_meta,
    )
    model.params[: model.n_backbone] = source.params[: source.n_backbone]
    model.input_mean[...] = source.input_mean
    model.input_scale[...] = source.input_scale
    model.normalizer_fitted = source.normalizer_fitted
    model.init_head(target_language, rng, head_init)
    if cfg.epochs == 0 or not examples:
        return TrainResult(model)
    tr, val = _split(list(examples), cfg.val_fraction, rng)
    return _fit(model, {target_language: tr}, val, cfg, rng)
