import filecmp
from collections import Counter

import numpy as np
import pytest

from polyscore.corpus import METRICS, load_manifest, load_pitch, load_posteriors, segment_frames
from polyscore.evaluation import aggregate_raters
from polyscore.synth import (
    SynthConfig,
    generate,
    generate_embedding_corpus,
    phonotactics,
    read_latents,
    write_embedding_corpus,
)


def _tree(root):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


class TestGenerate:
    def test_same_seed_byte_identical(self, tmp_path, table):
        cfg = SynthConfig(language="ta", n_utterances=8, seed=11)
        generate(cfg, table, tmp_path / "a")
        generate(cfg, table, tmp_path / "b")
        files = _tree(tmp_path / "a")
        assert files == _tree(tmp_path / "b")
        assert len(files) == 2 * 8 + 2
        for f in files:
            assert filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False), f

    def test_different_seed_differs(self, table):
        a = generate(SynthConfig(n_utterances=3, seed=1), table)
        b = generate(SynthConfig(n_utterances=3, seed=2), table)
        assert a.latents != b.latents

    def test_written_files_load(self, synth_en, table):
        utts = load_manifest(synth_en.manifest_path, table)
        assert [u.id for u in utts] == [u.id for u in synth_en.utterances]
        for u in utts[:5]:
            post = load_posteriors(u.posterior_path())
            pitch = load_pitch(u.pitch_path())
            assert post.n_frames == pitch.n_frames == segment_frames(u.phones[-1], post.step)[1]
            assert post.phone_labels == tuple(table.language_phones("en"))

    def test_latents_sidecar(self, synth_en):
        lat = read_latents(synth_en.manifest_path.parent / "latents.tsv")
        assert set(lat) == set(synth_en.latents)
        for uid, q in synth_en.latents.items():
            np.testing.assert_allclose(lat[uid], q, rtol=0, atol=0)
            assert all(0.0 <= v <= 1.0 for v in q)

    def test_perfect_speakers(self, table):
        cfg = SynthConfig(language="en", n_utterances=4, rater_noise=0.0, latent_override=dict.fromkeys(METRICS, 1.0))
        corpus = generate(cfg, table)
        for utt in corpus.utterances:
            for m in METRICS:
                assert set(utt.scores.raters(m)) == {cfg.scale_max}
            post = corpus.posteriors[utt.id]
            for seg in utt.phones:
                lo, hi = segment_frames(seg, post.step)
                expected = np.zeros(len(post.phone_labels))
                expected[post.column(seg.phone)] = 1.0
                np.testing.assert_array_equal(post.values[lo:hi], np.tile(expected, (hi - lo, 1)))

    def test_noise_free_raters_recover_latent(self, table):
        cfg = SynthConfig(language="my", n_utterances=20, rater_noise=0.0, seed=4)
        corpus = generate(cfg, table)
        span = cfg.scale_max - cfg.scale_min
        for utt in corpus.utterances:
            q = corpus.latents[utt.id]
            for j, m in enumerate(METRICS):
                agg = aggregate_raters([[r] for r in utt.scores.raters(m)], "mean")[0]
                assert agg == pytest.approx(cfg.scale_min + q[j] * span, abs=1e-12)

    def test_mora_multiples(self, table):
        cfg = SynthConfig(language="ta", rhythm_class="mora", jitter=0.0, rate_effect=0.0, n_utterances=10)
        for utt in generate(cfg, table).utterances:
            units = utt.durations / cfg.mora_base
            np.testing.assert_allclose(units, np.round(units), atol=1e-12)

    def test_stress_bimodal(self, table):
        cfg = SynthConfig(language="en", jitter=0.0, rate_effect=0.0, n_utterances=5)
        for utt in generate(cfg, table).utterances:
            assert set(np.round(utt.durations, 12)) <= {0.16, 0.06}

    def test_rhythm_depends_on_durations_only(self, table):
        base = dict(language="en", n_utterances=6, rater_noise=0.0, seed=2)
        a = generate(SynthConfig(**base, latent_override={"pronunciation": 0.1, "intonation": 0.9}), table)
        b = generate(SynthConfig(**base, latent_override={"pronunciation": 0.8, "intonation": 0.2}), table)
        for ua, ub in zip(a.utterances, b.utterances):
            assert ua.phones == ub.phones
            assert ua.scores.rhythm == ub.scores.rhythm
            assert not np.array_equal(a.posteriors[ua.id].values, b.posteriors[ub.id].values)

    @pytest.mark.parametrize(
        "kw", [{"rhythm_class": "tonal"}, {"n_utterances": 0}, {"phones_range": (5, 2)}, {"rater_noise": -1}]
    )
    def test_bad_config(self, kw):
        with pytest.raises(ValueError):
            SynthConfig(**kw)

    def test_language_must_be_in_table(self, tiny_table):
        with pytest.raises(ValueError):
            generate(SynthConfig(language="ta", n_utterances=1), tiny_table)


class TestEmbeddingCorpus:
    @pytest.mark.parametrize("n", [1, 10, 31])
    def test_line_count_and_closure(self, table, n):
        lines = generate_embedding_corpus(SynthConfig(language="my"), table, n)
        assert len(lines) == n
        assert {tok for ln in lines for tok in ln} <= set(table.entries)

    def test_pair_shares_contexts(self, table):
        chain = phonotactics(table, "en")
        assert chain.pair == ("en_AA", "en_AE")
        lines = generate_embedding_corpus(SynthConfig(language="en"), table, 400)
        ctx = {p: Counter() for p in chain.pair}
        # a line with the slot filled twice repeats the same member, so the
        # members are compared with each other folded onto one placeholder
        fold = {p: "<pair>" for p in chain.pair}
        for ln in lines:
            for i, tok in enumerate(ln):
                if tok not in ctx:
                    continue
                window = range(max(0, i - 4), min(len(ln), i + 5))
                ctx[tok].update((j - i, fold.get(ln[j], ln[j])) for j in window if j != i)
        assert ctx["en_AA"] == ctx["en_AE"]
        assert sum(ctx["en_AA"].values()) > 0

    def test_write(self, table, tmp_path):
        lines = generate_embedding_corpus(SynthConfig(language="ta"), table, 5)
        write_embedding_corpus(lines, tmp_path / "c.txt")
        assert [ln.split() for ln in (tmp_path / "c.txt").read_text().splitlines()] == lines
