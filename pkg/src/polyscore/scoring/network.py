"""Stacked bidirectional LSTM scorer with per-language linear+tanh heads.

All trainable parameters live in one flat float64 vector; named entries of
``model.views`` are reshaped windows onto it. Backbone parameters come
first, heads after, so ``params[:n_backbone]`` is the shared part.

Gate order inside every ``W``/``b`` block is (input, forget, cell, output).
``W`` stacks the input rows on top of the recurrent rows:
``z_t = [x_t, h_{t-1}] @ W + b``.
"""

import numpy as np

from ..errors import ValidationError

from .. import kernels
from ..corpus import METRICS


def param_specs(input_dim, hidden, layers, n_outputs, languages):
    specs = []
    n_in = input_dim
    for layer in range(layers):
        for d in ("fwd", "bwd"):
            specs.append((f"l{layer}.{d}.W", (n_in + hidden, 4 * hidden)))
            specs.append((f"l{layer}.{d}.b", (4 * hidden,)))
        n_in = 2 * hidden
    for lang in languages:
        specs.append((f"head.{lang}.W", (2 * hidden, n_outputs)))
        specs.append((f"head.{lang}.b", (n_outputs,)))
    return specs


def closed_form_param_count(input_dim, hidden=256, layers=2, n_outputs=3, n_heads=1):
    """Parameter count of the topology without building it.

    Each direction of layer ``l`` holds ``4 * ((in_l + h) * h + h)`` weights,
    with ``in_0 = input_dim`` and ``in_l = 2h`` above; every head holds
    ``2h * n_outputs + n_outputs``.
    """
    total = 0
    n_in = input_dim
    for _ in range(layers):
        total += 2 * 4 * ((n_in + hidden) * hidden + hidden)
        n_in = 2 * hidden
    return total + n_heads * (2 * hidden * n_outputs + n_outputs)


class ScoringModel:
    def __init__(
        self,
        input_dim,
        languages,
        hidden=256,
        layers=2,
        metrics=METRICS,
        layout=None,
        seed=0,
        head_init="uniform",
        feature_meta=None,
    ):
        if layers < 1 or hidden < 1 or input_dim < 1:
            raise ValueError("input_dim, hidden and layers must be positive")
        languages = tuple(languages)
        if not languages or len(set(languages)) != len(languages):
            raise ValueError("need at least one distinct language head")
        self.input_dim = int(input_dim)
        self.hidden = int(hidden)
        self.layers = int(layers)
        self.metrics = tuple(metrics)
        self.languages = languages
        self.layout = dict(layout) if layout is not None else None
        self.feature_meta = dict(feature_meta or {})
        self.seed = int(seed)
        self.specs = param_specs(self.input_dim, self.hidden, self.layers, len(self.metrics), languages)
        sizes = [int(np.prod(shape)) for _, shape in self.specs]
        self.params = np.zeros(sum(sizes))
        self.views = {}
        self.slices = {}
        off = 0
        for (name, shape), size in zip(self.specs, sizes):
            self.slices[name] = slice(off, off + size)
            self.views[name] = self.params[off : off + size].reshape(shape)
            off += size
        self.n_backbone = sum(size for (name, _), size in zip(self.specs, sizes) if not name.startswith("head."))
        self.input_mean = np.zeros(self.input_dim)
        self.input_scale = np.ones(self.input_dim)
        self.normalizer_fitted = False
        self._init_params(np.random.default_rng(self.seed), head_init)

    # -- construction -------------------------------------------------------

    def _init_params(self, rng, head_init):
        bound = 1.0 / np.sqrt(self.hidden)
        for name, _ in self.specs:
            if name.startswith("head."):
                continue
            v = self.views[name]
            v[...] = rng.uniform(-bound, bound, size=v.shape)
            if name.endswith(".b"):
                # forget-gate bias of 1 keeps early gradients alive
                v[self.hidden : 2 * self.hidden] += 1.0
        for lang in self.languages:
            self.init_head(lang, rng, head_init)

    def init_head(self, language, rng=None, mode="uniform"):
        W, b = self.views[f"head.{language}.W"], self.views[f"head.{language}.b"]
        if mode == "zeros":
            W[...] = 0.0
            b[...] = 0.0
        elif mode == "uniform":
            rng = rng if rng is not None else np.random.default_rng(self.seed)
            bound = 1.0 / np.sqrt(2 * self.hidden)
            W[...] = rng.uniform(-bound, bound, size=W.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        else:
            raise ValueError(f"unknown head init {mode!r}")

    def config(self):
        return {
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "layers": self.layers,
            "metrics": list(self.metrics),
            "languages": list(self.languages),
            "layout": self.layout,
            "feature_meta": self.feature_meta,
            "seed": self.seed,
        }

    def copy(self):
        new = ScoringModel.__new__(ScoringModel)
        new.__dict__.update(self.__dict__)
        new.params = self.params.copy()
        new.views = {n: new.params[s].reshape(self.views[n].shape) for n, s in self.slices.items()}
        new.input_mean = self.input_mean.copy()
        new.input_scale = self.input_scale.copy()
        new.layout = dict(self.layout) if self.layout is not None else None
        return new

    def with_languages(self, languages, head_init="uniform", rng=None):
        """Same backbone and normalizer; heads for ``languages``.

        Heads of languages this model already has are kept; new ones are
        initialized per ``head_init``.
        """
        new = ScoringModel(
            self.input_dim, languages, self.hidden, self.layers, self.metrics, self.layout, self.seed,
            head_init="zeros", feature_meta=self.feature_meta,
        )
        new.params[: self.n_backbone] = self.params[: self.n_backbone]
        new.input_mean[...] = self.input_mean
        new.input_scale[...] = self.input_scale
        new.normalizer_fitted = self.normalizer_fitted
        rng = rng if rng is not None else np.random.default_rng(self.seed + 1)
        for lang in new.languages:
            if lang in self.languages:
                for part in ("W", "b"):
                    new.views[f"head.{lang}.{part}"][...] = self.views[f"head.{lang}.{part}"]
            else:
                new.init_head(lang, rng, head_init)
        return new

    # -- reporting ----------------------------------------------------------

    @property
    def n_params(self):
        return self.params.size

    def param_count_report(self):
        per_head = 2 * self.hidden * len(self.metrics) + len(self.metrics)
        return {
            "backbone": self.n_backbone,
            "per_head": per_head,
            "heads": len(self.languages),
            "backbone_plus_one_head": self.n_backbone + per_head,
            "total": self.n_params,
        }

    def fit_normalizer(self, feature_arrays):
        rows = np.concatenate([np.asarray(f) for f in feature_arrays], axis=0)
        self.input_mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        self.input_scale = np.where(std > 1e-8, std, 1.0)
        self.normalizer_fitted = True

    # -- inference ----------------------------------------------------------

    def predict(self, features, languages, batch_size=64):
        """Rescaled predictions, shape (N, n_metrics), in (-1, 1)."""
        features = [f.rows if hasattr(f, "rows") else np.asarray(f) for f in features]
        out = np.empty((len(features), len(self.metrics)))
        for s in range(0, len(features), batch_size):
            X, mask = collate(features[s : s + batch_size])
            out[s : s + batch_size] = forward(self, X, mask, languages[s : s + batch_size])[0]
        return out

    def forward(self, features, language):
        rows = features.rows if hasattr(features, "rows") else np.asarray(features)
        return self.predict([rows], [language])[0]


def collate(features):
    """Pad a list of (T_i, D) arrays into time-major (T, B, D) plus a (T, B) mask."""
    B = len(features)
    T = max(f.shape[0] for f in features)
    D = features[0].shape[1]
    X = np.zeros((T, B, D))
    mask = np.zeros((T, B))
    for b, f in enumerate(features):
        X[: f.shape[0], b] = f
        mask[: f.shape[0], b] = 1.0
    return X, mask


def _check(model, X, languages):
    if X.shape[2] != model.input_dim:
        raise ValueError(f"feature width {X.shape[2]} does not match model input {model.input_dim}")
    for lang in set(languages):
        if lang not in model.languages:
            raise ValidationError(f"model has no head for language {lang!r}")


def _direction_forward(Xin, mask, W, b, reverse):
    T, B, n_in = Xin.shape
    H = W.shape[1] // 4
    Wx, Wh = W[:n_in], W[n_in:]
    Zx = (Xin.reshape(T * B, n_in) @ Wx).reshape(T, B, 4 * H) + b
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    Hs = np.empty((T, B, H))
    Hprev = np.empty((T, B, H))
    Cprev = np.empty((T, B, H))
    G = np.empty((T, B, 4 * H))
    TC = np.empty((T, B, H))
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        Hprev[t] = h
        Cprev[t] = c
        z = Zx[t] + h @ Wh
        h, c, G[t], TC[t] = kernels.lstm_step_fwd(z, c, h, mask[t])
        Hs[t] = h
    return Hs, (Xin, Hprev, Cprev, G, TC, reverse)


def _direction_backward(dHs, cache, mask, W):
    Xin, Hprev, Cprev, G, TC, reverse = cache
    T, B, n_in = Xin.shape
    H = W.shape[1] // 4
    Wx, Wh = W[:n_in], W[n_in:]
    dZ = np.empty((T, B, 4 * H))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    steps = range(T) if reverse else range(T - 1, -1, -1)
    for t in steps:
        dz, dh_carry, dc = kernels.lstm_step_bwd(dHs[t] + dh, dc, G[t], TC[t], Cprev[t], mask[t])
        dZ[t] = dz
        dh = dh_carry + dz @ Wh.T
    dZ2 = dZ.reshape(T * B, 4 * H)
    dW = np.concatenate([Xin.reshape(T * B, n_in).T @ dZ2, Hprev.reshape(T * B, H).T @ dZ2], axis=0)
    db = dZ2.sum(axis=0)
    dXin = (dZ2 @ Wx.T).reshape(T, B, n_in)
    return dW, db, dXin


def encode(model, X, mask):
    """Utterance representations (B, 2H) = [last forward state, last backward state]."""
    inp = (X - model.input_mean) / model.input_scale
    caches = []
    for layer in range(model.layers):
        Hf, cf = _direction_forward(inp, mask, model.views[f"l{layer}.fwd.W"], model.views[f"l{layer}.fwd.b"], False)
        Hb, cb = _direction_forward(inp, mask, model.views[f"l{layer}.bwd.W"], model.views[f"l{layer}.bwd.b"], True)
        caches.append((cf, cb))
        inp = np.concatenate([Hf, Hb], axis=2)
    H = model.hidden
    rep = np.concatenate([inp[-1, :, :H], inp[0, :, H:]], axis=1)
    return rep, caches


def forward(model, X, mask, languages):
    """Predictions (B, n_metrics) for a collated batch plus the backward cache."""
    _check(model, X, languages)
    rep, caches = encode(model, X, mask)
    Y = np.empty((X.shape[1], len(model.metrics)))
    languages = list(languages)
    groups = {}
    for b, lang in enumerate(languages):
        groups.setdefault(lang, []).append(b)
    for lang, idx in groups.items():
        Y[idx] = np.tanh(rep[idx] @ model.views[f"head.{lang}.W"] + model.views[f"head.{lang}.b"])
    return Y, (rep, caches, groups, mask, X.shape)


def backward(model, cache, Y, dY):
    """Flat gradient (same layout as ``model.params``) given dLoss/dY."""
    rep, caches, groups, mask, xshape = cache
    grad = np.zeros_like(model.params)
    gv = {n: grad[s].reshape(model.views[n].shape) for n, s in model.slices.items()}
    dpre = dY * (1.0 - Y * Y)
    drep = np.empty_like(rep)
    for lang, idx in groups.items():
        gv[f"head.{lang}.W"] += rep[idx].T @ dpre[idx]
        gv[f"head.{lang}.b"] += dpre[idx].sum(axis=0)
        drep[idx] = dpre[idx] @ model.views[f"head.{lang}.W"].T
    T, B, _ = xshape
    H = model.hidden
    dOut = np.zeros((T, B, 2 * H))
    dOut[-1, :, :H] = drep[:, :H]
    dOut[0, :, H:] = drep[:, H:]
    for layer in range(model.layers - 1, -1, -1):
        cf, cb = caches[layer]
        dWf, dbf, dXf = _direction_backward(dOut[:, :, :H], cf, mask, model.views[f"l{layer}.fwd.W"])
        dWb, dbb, dXb = _direction_backward(dOut[:, :, H:], cb, mask, model.views[f"l{layer}.bwd.W"])
        gv[f"l{layer}.fwd.W"] += dWf
        gv[f"l{layer}.fwd.b"] += dbf
        gv[f"l{layer}.bwd.W"] += dWb
        gv[f"l{layer}.bwd.b"] += dbb
        dOut = dXf + dXb
    return grad
