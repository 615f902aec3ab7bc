"""Acceptance criteria, one test per criterion.

Each criterion records a one-line PASS/FAIL summary that is printed at the
end of the pytest run (and by ``python tests/test_acceptance.py``).
"""

import functools
import math
import sys
import time

import numpy as np
import pytest

from polyscore.corpus import PosteriorMatrix
from polyscore.evaluation import evaluate, interrater_upperbound, mean_pcc, mse, pcc
from polyscore.features import GopConfig, TempoConfig, compute_gop, splice_all, tempo_instants, tempo_splice
from polyscore.phonemb import SkipgramConfig, train_embeddings
from polyscore.pipeline import extract
from polyscore.scoring import (
    Example,
    ScoringModel,
    TrainConfig,
    adapt,
    closed_form_param_count,
    gradient,
    load,
    loss_and_gradient,
    make_examples,
    save,
    train,
    train_multitask,
)
from polyscore.synth import SynthConfig, default_table, generate, generate_embedding_corpus, phonotactics

RESULTS = {}


def _record(n, name, passed, detail):
    RESULTS[f"C{n}"] = f"[{'PASS' if passed else 'FAIL'}] C{n:<2} {name}: {detail}"
    print(RESULTS[f"C{n}"])
    return passed, detail


# ---------------------------------------------------------------------------
# 1. GOP oracle
# ---------------------------------------------------------------------------


def _gop_oracle(values, lo, hi, col, eps=1e-10):
    return math.fsum(math.log(max(float(values[t][col]), eps)) for t in range(lo, hi)) / (hi - lo)


def criterion_1():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n_ph = int(rng.integers(1, 11))
        n_fr = int(rng.integers(1, 51))
        vals = rng.dirichlet(np.full(n_ph, 0.5), size=n_fr)
        if n_ph > 1 and rng.random() < 0.2:
            vals[rng.integers(n_fr), rng.integers(n_ph)] = 0.0
            vals /= vals.sum(axis=1, keepdims=True)
        post = PosteriorMatrix(0.01, tuple(f"en_p{j}" for j in range(n_ph)), vals)
        lo = int(rng.integers(0, n_fr))
        hi = int(rng.integers(lo + 1, n_fr + 1))
        col = int(rng.integers(n_ph))
        got = compute_gop(post, (lo, hi), col, GopConfig())
        worst = max(worst, abs(got - _gop_oracle(vals, lo, hi, col)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 10.0
    return _record(1, "GOP oracle", ok, f"max |diff| {worst:.2e} (<= 1e-12), {elapsed:.2f} s (< 10 s)")


# ---------------------------------------------------------------------------
# 2. Tempo normalization
# ---------------------------------------------------------------------------


def criterion_2():
    rng = np.random.default_rng(202)
    cfg = TempoConfig()
    worst_mean = worst_std = 0.0
    dims_ok = True
    checked = 0
    while checked < 1000:
        n = int(rng.integers(2, 40))
        d = rng.uniform(0.02, 0.4, n)
        if d.std() < cfg.sigma_floor:
            continue
        z = tempo_instants(d, cfg)[:, 1]
        worst_mean = max(worst_mean, abs(math.fsum(z) / n))
        worst_std = max(worst_std, abs(math.sqrt(math.fsum(v * v for v in z) / n) - 1.0))
        k = int(rng.integers(0, 5))
        inst = tempo_instants(d, TempoConfig(k=k))
        dims_ok &= splice_all(inst, k).shape == (n, 2 * (2 * k + 1))
        dims_ok &= all(tempo_splice(inst, i, k).shape == (2 * (2 * k + 1),) for i in range(n))
        checked += 1
    ok = worst_mean <= 1e-9 and worst_std <= 1e-9 and dims_ok
    detail = f"max |mean| {worst_mean:.1e}, max |std-1| {worst_std:.1e} (<= 1e-9), splice dims 2(2k+1): {dims_ok}"
    return _record(2, "tempo normalization", ok, detail)


# ---------------------------------------------------------------------------
# 3. Gradient check
# ---------------------------------------------------------------------------


def criterion_3():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    model = ScoringModel(6, ("my", "ta"), hidden=4, layers=2, seed=3)
    model.params[...] = rng.uniform(-0.6, 0.6, model.params.size)
    batch = []
    for i, lang in enumerate(["my", "ta", "my", "ta"]):
        X = rng.standard_normal((3, 6))
        batch.append(Example(f"g{i}", lang, X, rng.uniform(-0.9, 0.9, 3), np.zeros(3), 1.0, 5.0))
    analytic = gradient(model, batch)
    numeric = np.empty_like(analytic)
    h = 1e-6
    for i in range(model.params.size):
        old = model.params[i]
        model.params[i] = old + h
        up = loss_and_gradient(model, batch)[0]
        model.params[i] = old - h
        down = loss_and_gradient(model, batch)[0]
        model.params[i] = old
        numeric[i] = (up - down) / (2 * h)
    errs = {}
    for name, sl in model.slices.items():
        a, f = analytic[sl], numeric[sl]
        errs[name] = float(np.linalg.norm(a - f) / max(np.linalg.norm(a), np.linalg.norm(f), 1e-30))
    elapsed = time.perf_counter() - t0
    worst = max(errs, key=errs.get)
    ok = errs[worst] < 1e-4 and elapsed < 60.0
    detail = f"{len(errs)} groups, worst {worst} rel err {errs[worst]:.1e} (< 1e-4), {elapsed:.1f} s (< 60 s)"
    return _record(3, "gradient check", ok, detail)


# ---------------------------------------------------------------------------
# 4. Embedding property
# ---------------------------------------------------------------------------


def criterion_4():
    t0 = time.perf_counter()
    table = default_table()
    a, b = phonotactics(table, "en").pair
    passes = []
    for seed in range(5):
        corpus = []
        for lang in table.languages:
            corpus += generate_embedding_corpus(SynthConfig(language=lang, seed=seed), table)
        emb = train_embeddings(corpus, table, SkipgramConfig(seed=seed))
        V = emb.values / np.linalg.norm(emb.values, axis=1, keepdims=True)
        cos = V @ V[table.index_of(a)]
        others = np.delete(cos, [table.index_of(a), table.index_of(b)])
        passes.append(bool(cos[table.index_of(b)] > np.percentile(others, 95)))
    elapsed = time.perf_counter() - t0
    ok = sum(passes) >= 4 and elapsed < 120.0
    detail = f"cos({a},{b}) above 95th pct in {sum(passes)}/5 seeds (>= 4), {elapsed:.1f} s (< 120 s)"
    return _record(4, "embedding pair", ok, detail)


# ---------------------------------------------------------------------------
# 5. Ablation direction
# ---------------------------------------------------------------------------


def _rhythm_pcc(train_c, test_c, slots, hidden=256):
    ftr = extract(train_c.utterances, None, slots, in_memory=train_c)
    fte = extract(test_c.utterances, None, slots, in_memory=test_c)
    xtr, xte = make_examples(train_c.utterances, ftr), make_examples(test_c.utterances, fte)
    model = ScoringModel(xtr[0].features.shape[1], ("en",), hidden=hidden, seed=0)
    trained = train(model, xtr, TrainConfig(epochs=30, patience=5, seed=0)).model
    return evaluate(trained, xte).pcc("rhythm")


def criterion_5():
    t0 = time.perf_counter()
    table = default_table()
    tr = generate(SynthConfig(language="en", n_utterances=500, seed=1, rater_noise=0.1), table)
    te = generate(SynthConfig(language="en", n_utterances=200, seed=2, rater_noise=0.1), table)
    with_tempo = _rhythm_pcc(tr, te, ("gop", "tempo"))
    gop_only = _rhythm_pcc(tr, te, ("gop",))
    elapsed = time.perf_counter() - t0
    ok = with_tempo >= 0.8 and gop_only <= 0.3 and elapsed < 600.0
    detail = (
        f"rhythm PCC {{gop,tempo}} {with_tempo:.3f} (>= 0.8), {{gop}} {gop_only:.3f} (<= 0.3), "
        f"hidden 256, {elapsed:.0f} s (< 600 s)"
    )
    return _record(5, "ablation direction", ok, detail)


# ---------------------------------------------------------------------------
# 6 + 7. Multi-task gain and adaptation (shared runs)
# ---------------------------------------------------------------------------

TRANSFER_HIDDEN = 64


@functools.lru_cache(maxsize=None)
def _transfer_runs():
    t0 = time.perf_counter()
    table = default_table()
    corpus = []
    for lang in table.languages:
        corpus += generate_embedding_corpus(SynthConfig(language=lang), table, 1000)
    emb = train_embeddings(corpus, table, SkipgramConfig(epochs=3))

    def dataset(lang, n, seed):
        c = generate(SynthConfig(language=lang, n_utterances=n, seed=seed, id_prefix=f"{lang}{seed}_"), table)
        return make_examples(c.utterances, extract(c.utterances, emb, in_memory=c))

    a_train = dataset("my", 2000, 10)
    b_test = dataset("ta", 300, 99)
    dim = a_train[0].features.shape[1]
    rows = []
    for s in range(3):
        b_train = dataset("ta", 200, 20 + s)
        cfg = TrainConfig(epochs=30, patience=5, seed=s)
        mono = train(ScoringModel(dim, ("ta",), hidden=TRANSFER_HIDDEN, seed=s), b_train, cfg).model
        multi = train_multitask(
            ScoringModel(dim, ("my", "ta"), hidden=TRANSFER_HIDDEN, seed=s), {"my": a_train, "ta": b_train}, cfg
        ).model
        source = train(ScoringModel(dim, ("my",), hidden=TRANSFER_HIDDEN, seed=s), a_train, cfg).model
        adapted = adapt(source, "ta", b_train, cfg).model
        rows.append([mean_pcc(evaluate(m, b_test)) for m in (mono, multi, adapted)])
    return np.array(rows), time.perf_counter() - t0


def criterion_6():
    rows, elapsed = _transfer_runs()
    mono, multi = rows[:, 0].mean(), rows[:, 1].mean()
    gain = multi - mono
    ok = gain >= 0.03 and elapsed < 1800.0
    detail = (
        f"lang-B mean PCC mono {mono:.3f} -> multitask {multi:.3f}, gain {gain:+.3f} (>= 0.03) over 3 seeds, "
        f"hidden {TRANSFER_HIDDEN}, {elapsed:.0f} s (< 1800 s)"
    )
    return _record(6, "multi-task gain", ok, detail)


def criterion_7():
    rows, _ = _transfer_runs()
    mono, adapted = rows[:, 0].mean(), rows[:, 2].mean()
    ok = adapted >= mono
    detail = f"lang-B mean PCC mono {mono:.3f}, adapted {adapted:.3f} (>= mono) over 3 seeds"
    return _record(7, "adaptation", ok, detail)


# ---------------------------------------------------------------------------
# 8. Metric correctness
# ---------------------------------------------------------------------------


def _pcc_oracle(x, y):
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def _mse_oracle(x, y):
    return math.fsum((a - b) ** 2 for a, b in zip(x, y)) / len(x)


def _loo_oracle(raters, mode):
    vals = []
    for i in range(len(raters)):
        rest = [r for j, r in enumerate(raters) if j != i]
        agg = []
        for t in range(len(raters[i])):
            col = sorted(r[t] for r in rest)
            if mode == "mean":
                agg.append(math.fsum(col) / len(col))
            else:
                m = len(col) // 2
                agg.append(col[m] if len(col) % 2 else (col[m - 1] + col[m]) / 2)
        vals.append(_pcc_oracle(raters[i], agg))
    return math.fsum(vals) / len(vals)


def criterion_8():
    rng = np.random.default_rng(808)
    worst_pcc = worst_mse = worst_affine = worst_loo = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 60))
        x = rng.standard_normal(n) * rng.uniform(0.1, 10)
        y = 0.5 * x + rng.standard_normal(n)
        worst_pcc = max(worst_pcc, abs(pcc(x, y) - _pcc_oracle(list(x), list(y))))
        worst_mse = max(worst_mse, abs(mse(x, y) - _mse_oracle(list(x), list(y))))
        a, b = rng.uniform(0.01, 100), rng.uniform(-100, 100)
        worst_affine = max(worst_affine, abs(pcc(a * x + b, y) - pcc(x, y)), abs(pcc(-a * x + b, y) + pcc(x, y)))
    for _ in range(200):
        n_r, n = int(rng.integers(3, 7)), int(rng.integers(5, 40))
        latent = rng.uniform(1, 5, n)
        raters = [list(latent + rng.standard_normal(n) * rng.uniform(0.2, 1.0)) for _ in range(n_r)]
        for mode in ("mean", "median"):
            worst_loo = max(worst_loo, abs(interrater_upperbound(raters, mode) - _loo_oracle(raters, mode)))
    ok = max(worst_pcc, worst_mse, worst_affine, worst_loo) <= 1e-12
    detail = (
        f"max |diff| pcc {worst_pcc:.1e}, mse {worst_mse:.1e}, affine {worst_affine:.1e} (1000 cases), "
        f"leave-one-out {worst_loo:.1e} (all <= 1e-12)"
    )
    return _record(8, "metric correctness", ok, detail)


# ---------------------------------------------------------------------------
# 9. Parameter budget
# ---------------------------------------------------------------------------


def criterion_9():
    d, h = 47, 256
    hand = 0
    n_in = d
    for _ in range(2):
        hand += 2 * (4 * h * (n_in + h) + 4 * h)  # two directions: input + recurrent weights, biases
        n_in = 2 * h
    hand += 2 * h * 3 + 3
    model = ScoringModel(d, ("en",))
    count = model.n_params
    ok = count == hand == closed_form_param_count(d) and abs(count - 2_000_000) <= 200_000
    detail = f"{count:,} parameters (closed form {hand:,}), {100 * (count / 2e6 - 1):+.2f}% vs 2M (within 10%)"
    return _record(9, "parameter budget", ok, detail)


# ---------------------------------------------------------------------------
# 10. Persistence
# ---------------------------------------------------------------------------


def criterion_10(tmp_dir):
    table = default_table()
    corp = generate(SynthConfig(language="en", n_utterances=50, seed=7), table)
    emb = train_embeddings(generate_embedding_corpus(SynthConfig(), table, 200), table, SkipgramConfig(epochs=1))
    ex = make_examples(corp.utterances, extract(corp.utterances, emb, in_memory=corp))
    model = train(ScoringModel(ex[0].features.shape[1], ("en",), seed=1), ex, TrainConfig(epochs=1)).model
    path = tmp_dir / "fixture.ckpt"
    save(model, path)
    back = load(path)
    feats, langs = [e.features for e in ex], [e.language for e in ex]
    before, after = model.predict(feats, langs), back.predict(feats, langs)
    ok = before.tobytes() == after.tobytes() and back.params.tobytes() == model.params.tobytes()
    return _record(10, "persistence", ok, f"50-utterance predictions bitwise identical after save/load: {ok}")


# ---------------------------------------------------------------------------
# pytest entry points
# ---------------------------------------------------------------------------


class TestAcceptance:
    def test_c01_gop_oracle(self):
        ok, detail = criterion_1()
        assert ok, detail

    def test_c02_tempo_normalization(self):
        ok, detail = criterion_2()
        assert ok, detail

    def test_c03_gradient_check(self):
        ok, detail = criterion_3()
        assert ok, detail

    def test_c04_embedding_pair(self):
        ok, detail = criterion_4()
        assert ok, detail

    @pytest.mark.slow
    def test_c05_ablation_direction(self):
        ok, detail = criterion_5()
        assert ok, detail

    @pytest.mark.slow
    def test_c06_multitask_gain(self):
        ok, detail = criterion_6()
        assert ok, detail

    @pytest.mark.slow
    def test_c07_adaptation(self):
        ok, detail = criterion_7()
        assert ok, detail

    def test_c08_metric_correctness(self):
        ok, detail = criterion_8()
        assert ok, detail

    def test_c09_parameter_budget(self):
        ok, detail = criterion_9()
        assert ok, detail

    def test_c10_persistence(self, tmp_path):
        ok, detail = criterion_10(tmp_path)
        assert ok, detail


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    runs = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9]
    results = [fn()[0] for fn in runs]
    with tempfile.TemporaryDirectory() as d:
        results.append(criterion_10(Path(d))[0])
    sys.exit(0 if all(results) else 1)
