"""Deterministic synthetic scored corpora.

Each utterance draws three proficiency latents in [0, 1]. They act on
disjoint inputs:

* pronunciation -> frame posteriors (target mass vs. uniform, substitutions)
* rhythm        -> phone durations (timing jitter and slowed speaking rate)
* intonation    -> pitch track (per-phone log-pitch scatter)

Durations start from a caricature of the language's rhythm class: a
long-short-short cycle for stress timing, near-constant for syllable timing
and a cycle of integer multiples of a base mora for mora timing.
"""

import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import (
    METRICS,
    PhoneSegment,
    PitchFrames,
    PosteriorMatrix,
    ScoreRecord,
    Utterance,
    segment_frames,
    write_manifest,
    write_pitch,
    write_posteriors,
)
from .phonemb import build_table

RHYTHM_CLASSES = ("stress", "syllable", "mora")

DEFAULT_INVENTORIES = {
    "en": "AA AE AH AO AW AY B CH D DH EH ER EY F G HH IH IY JH K L M N NG OW OY P R S SH T TH UH UW V W Y Z".split(),
    "my": "a e i o u E ai au b c d f g h j k l m n ny ng p r s sy t w y z".split(),
    "ta": "a aa i ii u uu e ee ai o oo au k ng c ny tt nn th n p m y r l v zh ll rr".split(),
}
DEFAULT_RHYTHM = {"en": "stress", "my": "syllable", "ta": "mora"}
DEFAULT_SCALE = {"en": (1.0, 10.0), "my": (1.0, 5.0), "ta": (1.0, 5.0)}


def default_table(languages=("en", "my", "ta")):
    return build_table({lang: DEFAULT_INVENTORIES[lang] for lang in languages})


@dataclass(frozen=True)
class SynthConfig:
    language: str = "en"
    rhythm_class: str = None
    n_utterances: int = 100
    phones_range: tuple = (6, 14)
    n_raters: int = 3
    rater_noise: float = 0.1  # std as a fraction of the scale range
    scale_min: float = None
    scale_max: float = None
    seed: int = 0
    grammar_seed: int = 0
    step_ms: int = 10
    mora_base: float = 0.05
    jitter: float = 0.35
    rate_effect: float = 0.8
    proficiency_beta: tuple = (2.0, 2.0)
    id_prefix: str = None
    corpus_lines: int = 2000
    precision: int = 6
    latent_override: dict = field(default=None, compare=False)

    def __post_init__(self):
        if self.rhythm_class is None:
            object.__setattr__(self, "rhythm_class", DEFAULT_RHYTHM.get(self.language, "syllable"))
        lo, hi = DEFAULT_SCALE.get(self.language, (1.0, 5.0))
        if self.scale_min is None:
            object.__setattr__(self, "scale_min", lo)
        if self.scale_max is None:
            object.__setattr__(self, "scale_max", hi)
        if self.id_prefix is None:
            object.__setattr__(self, "id_prefix", self.language)
        if self.rhythm_class not in RHYTHM_CLASSES:
            raise ValueError(f"rhythm_class must be one of {RHYTHM_CLASSES}")
        if self.rater_noise < 0 or self.jitter < 0 or self.rate_effect < 0:
            raise ValueError("rater_noise, jitter and rate_effect must be >= 0")
        if self.n_utterances < 1 or self.n_raters < 1:
            raise ValueError("need at least one utterance and one rater")
        lo_n, hi_n = self.phones_range
        if not 1 <= lo_n <= hi_n:
            raise ValueError("phones_range must satisfy 1 <= lo <= hi")
        if not self.scale_max > self.scale_min:
            raise ValueError("scale_max must exceed scale_min")


# ---------------------------------------------------------------------------
# Phonotactics shared by utterances and the embedding corpus
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Phonotactics:
    """Sparse first-order chain over a language's phones.

    The first two phones form an interchangeable pair: they share one
    chain state, and whichever surfaces is decided separately.
    """

    phones: tuple
    pair: tuple
    successors: np.ndarray  # (S, n_succ) state ids
    weights: np.ndarray  # (S, n_succ)

    def state_symbols(self, states, rng=None, pick=None):
        out = []
        for s in states:
            if s == 0:
                which = pick if pick is not None else int(rng.integers(2))
                out.append(self.pair[which])
            else:
                out.append(self.phones[s + 1])
        return out

    def walk(self, n, rng):
        n_states = self.successors.shape[0]
        states = [int(rng.integers(n_states))]
        for _ in range(n - 1):
            row = states[-1]
            states.append(int(self.successors[row, rng.choice(self.successors.shape[1], p=self.weights[row])]))
        return states


def phonotactics(table, language, grammar_seed=0, n_successors=4):
    phones = tuple(table.language_phones(language))
    if len(phones) < 3:
        raise ValueError(f"language {language!r} needs at least 3 phones in the table")
    rng = np.random.default_rng([zlib.crc32(language.encode()), grammar_seed])
    n_states = len(phones) - 1
    n_successors = min(n_successors, n_states)
    succ = np.stack([rng.choice(n_states, size=n_successors, replace=False) for _ in range(n_states)])
    weights = rng.dirichlet(np.ones(n_successors), size=n_states)
    return Phonotactics(phones, phones[:2], succ, weights)


# ---------------------------------------------------------------------------
# Utterances
# ---------------------------------------------------------------------------


STRESS_PATTERN = (0.16, 0.06, 0.06)
MORA_PATTERN = (1, 2, 1, 3, 1, 2)


def _template_durations(cfg, n, rng):
    # cyclic patterns with a random phase: the template itself carries no
    # utterance-level timing information
    if cfg.rhythm_class == "stress":
        phase = int(rng.integers(len(STRESS_PATTERN)))
        return np.array([STRESS_PATTERN[(phase + j) % len(STRESS_PATTERN)] for j in range(n)])
    if cfg.rhythm_class == "syllable":
        return 0.10 * np.clip(1.0 + 0.05 * rng.standard_normal(n), 0.8, 1.2)
    phase = int(rng.integers(len(MORA_PATTERN)))
    morae = np.array([MORA_PATTERN[(phase + j) % len(MORA_PATTERN)] for j in range(n)])
    return cfg.mora_base * morae


def _durations(cfg, n, q_rhythm, rng):
    base = _template_durations(cfg, n, rng)
    noise = rng.standard_normal(n)
    d = base * np.exp(cfg.jitter * (1.0 - q_rhythm) * noise)
    d = d * (1.0 + cfg.rate_effect * (1.0 - q_rhythm))
    return np.maximum(d, 0.02)


def _posteriors(labels, targets, n_frames, ranges, q_pron, rng):
    P = len(labels)
    col = {lab: j for j, lab in enumerate(labels)}
    actual = np.empty(n_frames, dtype=np.int64)
    for phone, (lo, hi) in zip(targets, ranges):
        c = col[phone]
        if rng.random() < 0.4 * (1.0 - q_pron):
            c = (c + 1 + int(rng.integers(P - 1))) % P
        actual[lo:hi] = c
    w = np.clip(q_pron + (1.0 - q_pron) * 0.25 * rng.standard_normal(n_frames), 0.0, 1.0)
    values = np.tile(((1.0 - w) / P)[:, None], (1, P))
    values[np.arange(n_frames), actual] += w
    return values


def _pitch(phone_ranges, n_frames, q_inton, rng):
    base = np.log(rng.uniform(120.0, 260.0))
    t = np.arange(n_frames) / max(n_frames - 1, 1)
    raw = base - 0.25 * t + 0.01 * rng.standard_normal(n_frames)
    offsets = (0.02 + 0.25 * (1.0 - q_inton)) * rng.standard_normal(len(phone_ranges))
    for off, (lo, hi) in zip(offsets, phone_ranges):
        raw[lo:hi] += off
    norm = raw - raw.mean()
    delta = np.zeros(n_frames)
    delta[1:] = raw[1:] - raw[:-1]
    nccf = np.clip(0.85 + 0.05 * rng.standard_normal(n_frames), -1.0, 1.0)
    return np.column_stack([raw, norm, delta, nccf])


def _rater_scores(cfg, q, rng):
    span = cfg.scale_max - cfg.scale_min
    s = cfg.scale_min + q * span + cfg.rater_noise * span * rng.standard_normal(cfg.n_raters)
    return tuple(float(v) for v in np.clip(s, cfg.scale_min, cfg.scale_max))


@dataclass
class SynthCorpus:
    utterances: list
    latents: dict
    posteriors: dict = field(repr=False, default_factory=dict)
    pitch: dict = field(repr=False, default_factory=dict)
    manifest_path: Path = None


def generate(cfg, table, out_dir=None):
    """Generate ``cfg.n_utterances`` scored utterances.

    With ``out_dir`` the manifest, posterior/pitch files and ``latents.tsv``
    are written there; the returned utterances then resolve their file
    references against ``out_dir``.
    """
    if cfg.language not in table.languages:
        raise ValueError(f"language {cfg.language!r} is not in the phoneme table")
    chain = phonotactics(table, cfg.language, cfg.grammar_seed)
    labels = chain.phones
    step = cfg.step_ms / 1000.0
    base_dir = Path(out_dir) if out_dir is not None else None
    width = len(str(cfg.n_utterances - 1))
    out = SynthCorpus([], {})
    for i in range(cfg.n_utterances):
        rng = np.random.default_rng([cfg.seed, i])
        uid = f"{cfg.id_prefix}{i:0{width}d}"
        q = rng.beta(*cfg.proficiency_beta, size=3)
        if cfg.latent_override:
            q = np.array([cfg.latent_override.get(m, qm) for m, qm in zip(METRICS, q)])
        n = int(rng.integers(cfg.phones_range[0], cfg.phones_range[1] + 1))
        phones = chain.state_symbols(chain.walk(n, rng), rng)
        durs = _durations(cfg, n, q[1], rng)
        starts = np.concatenate([[0.0], np.cumsum(durs)[:-1]])
        segs = tuple(PhoneSegment(p, float(s), float(d)) for p, s, d in zip(phones, starts, durs))
        ranges = [segment_frames(seg, step) for seg in segs]
        n_frames = ranges[-1][1]
        post = PosteriorMatrix(step, labels, _posteriors(labels, phones, n_frames, ranges, q[0], rng))
        pitch = PitchFrames(step, _pitch(ranges, n_frames, q[2], rng))
        scores = ScoreRecord(
            *(_rater_scores(cfg, q[j], rng) for j in range(3)), scale_min=cfg.scale_min, scale_max=cfg.scale_max
        )
        utt = Utterance(uid, cfg.language, segs, scores, f"posteriors/{uid}.csv", f"pitch/{uid}.csv", base_dir)
        out.utterances.append(utt)
        out.latents[uid] = tuple(float(v) for v in q)
        out.posteriors[uid] = post
        out.pitch[uid] = pitch
    if base_dir is not None:
        write_corpus(out, base_dir, cfg.precision)
    return out


def write_corpus(corpus, out_dir, precision=6):
    out_dir = Path(out_dir)
    (out_dir / "posteriors").mkdir(parents=True, exist_ok=True)
    (out_dir / "pitch").mkdir(parents=True, exist_ok=True)
    for utt in corpus.utterances:
        write_posteriors(corpus.posteriors[utt.id], out_dir / utt.posterior_ref, precision)
        write_pitch(corpus.pitch[utt.id], out_dir / utt.pitch_ref, precision)
    corpus.manifest_path = out_dir / "manifest.jsonl"
    write_manifest(corpus.utterances, corpus.manifest_path)
    write_latents(corpus.latents, out_dir / "latents.tsv")


def write_latents(latents, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("#id\tq_pron\tq_rhythm\tq_inton\n")
        for uid, q in latents.items():
            fh.write(uid + "\t" + "\t".join(repr(v) for v in q) + "\n")


def read_latents(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            if ln.startswith("#") or not ln.strip():
                continue
            uid, *vals = ln.rstrip("\n").split("\t")
            out[uid] = tuple(float(v) for v in vals)
    return out


def generate_embedding_corpus(cfg, table, n_lines=None):
    """Phone strings from the same chain as :func:`generate`.

    Lines come in twins that differ only in which member of the
    interchangeable pair fills the shared slot, so both members end up
    with identical context multisets. With an odd count the last line
    avoids the pair altogether.
    """
    n_lines = cfg.corpus_lines if n_lines is None else n_lines
    chain = phonotactics(table, cfg.language, cfg.grammar_seed)
    rng = np.random.default_rng([cfg.seed, 1 << 30])
    lines = []
    for _ in range(n_lines // 2):
        n = int(rng.integers(cfg.phones_range[0], cfg.phones_range[1] + 1))
        states = chain.walk(n, rng)
        lines.append(chain.state_symbols(states, pick=0))
        lines.append(chain.state_symbols(states, pick=1))
    if n_lines % 2:
        n = int(rng.integers(cfg.phones_range[0], cfg.phones_range[1] + 1))
        states = chain.walk(n, rng)
        for _ in range(100):
            if 0 not in states:
                break
            states = chain.walk(n, rng)
        else:
            states = [s for s in states if s != 0] or [1]
        lines.append(chain.state_symbols(states))
    return lines


def write_embedding_corpus(lines, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ln in lines:
            fh.write(" ".join(ln) + "\n")


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
