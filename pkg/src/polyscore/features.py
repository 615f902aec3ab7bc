"""Per-phone features: GOP, tempo/duration context vectors, phone-averaged
pitch, and their assembly into one row per canonical phone.
"""

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .corpus import segment_frames
from .errors import FormatError, ValidationError
from .phonemb import eos_symbol

SLOT_ORDER = ("gop", "tempo", "dur", "phonemb", "pitch")
PITCH_DIM = 4


class FeatureWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GopConfig:
    """``priors`` maps prefixed phone -> P(p); ``None`` means uniform."""

    priors: dict = None
    epsilon: float = 1e-10

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.priors is not None:
            total = sum(self.priors.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"priors sum to {total!r}, not 1")
            if any(p < 0 for p in self.priors.values()):
                raise ValueError("priors must be non-negative")


@dataclass(frozen=True)
class TempoConfig:
    k: int = 2
    sigma_floor: float = 1e-6

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("context radius k must be >= 0")


# ---------------------------------------------------------------------------
# GOP
# ---------------------------------------------------------------------------


def _prior_weighted(values, labels, priors):
    w = np.array([priors.get(lab, 0.0) for lab in labels])
    if not w.any():
        raise ValidationError("priors give zero mass to every posterior column")
    out = values * w
    sums = out.sum(axis=1, keepdims=True)
    # a frame whose mass sits entirely on zero-prior phones has no defined posterior
    sums[sums == 0] = 1.0
    return out / sums


def compute_gop(post, frange, phone, cfg=GopConfig()):
    """Mean log posterior of column ``phone`` over frames ``[lo, hi)``.

    ``phone`` is a column index or a prefixed symbol. Frames are treated
    independently: each row is already normalized over every phone, which
    stands in for the sum over competing paths. Non-uniform priors reweight
    the rows and renormalize them first. Result is in nats and <= 0.
    """
    lo, hi = frange
    if not 0 <= lo < hi <= post.n_frames:
        raise ValidationError(f"frame range [{lo}, {hi}) is empty or outside {post.n_frames} frames")
    col = post.column(phone) if isinstance(phone, str) else int(phone)
    if not 0 <= col < len(post.phone_labels):
        raise ValidationError(f"posterior column {col} out of bounds")
    values = post.values
    if cfg.priors is not None:
        values = _prior_weighted(values[lo:hi], post.phone_labels, cfg.priors)
        lo, hi = 0, hi - lo
    return kernels.frame_log_mean(np.ascontiguousarray(values), lo, hi, col, cfg.epsilon)


def estimate_priors(utterances, table=None):
    """Phone priors from aligned frame counts, e.g. over training alignments.

    Durations stand in for frame counts. Phones of ``table`` that never
    occur get zero mass.
    """
    mass = {}
    for utt in utterances:
        for seg in utt.phones:
            mass[seg.phone] = mass.get(seg.phone, 0.0) + seg.duration
    if table is not None:
        for lang in {u.language for u in utterances}:
            for sym in table.language_phones(lang):
                mass.setdefault(sym, 0.0)
    total = sum(mass.values())
    return {k: v / total for k, v in sorted(mass.items())}


# ---------------------------------------------------------------------------
# Tempo and duration
# ---------------------------------------------------------------------------


def tempo_instants(durations, cfg=TempoConfig()):
    """(n, 2) array of ``(1/tau, (tau - mu) / sigma)`` for a sentence.

    ``mu`` and ``sigma`` are the population mean and standard deviation of
    the sentence's phone durations; if ``sigma`` is below the floor the
    second column is zero.
    """
    d = np.asarray(durations, dtype=np.float64)
    if d.size == 0:
        raise ValueError("sentence has no phone durations")
    if np.any(d <= 0):
        raise ValueError("phone durations must be positive")
    mu = d.mean()
    sigma = d.std()
    z = np.zeros_like(d) if sigma < cfg.sigma_floor else (d - mu) / sigma
    return np.column_stack([1.0 / d, z])


def tempo_instant(tau, sentence_durations, cfg=TempoConfig()):
    if not tau > 0:
        raise ValueError("tau must be positive")
    d = np.asarray(sentence_durations, dtype=np.float64)
    if d.size == 0:
        raise ValueError("sentence has no phone durations")
    mu, sigma = d.mean(), d.std()
    z = 0.0 if sigma < cfg.sigma_floor else (tau - mu) / sigma
    return np.array([1.0 / tau, z])


def splice(frames, i, k):
    """Concatenate rows ``i-k .. i+k`` of ``frames``; outside rows are zero."""
    frames = np.asarray(frames, dtype=np.float64)
    n, w = frames.shape
    if not 0 <= i < n:
        raise IndexError(f"phone index {i} out of range for {n} phones")
    out = np.zeros((2 * k + 1, w))
    lo, hi = max(i - k, 0), min(i + k + 1, n)
    out[lo - (i - k) : hi - (i - k)] = frames[lo:hi]
    return out.ravel()


def splice_all(frames, k):
    """All spliced rows at once: (n, (2k+1) * width)."""
    frames = np.asarray(frames, dtype=np.float64)
    n, w = frames.shape
    padded = np.zeros((n + 2 * k, w))
    padded[k : k + n] = frames
    return np.concatenate([padded[j : j + n] for j in range(2 * k + 1)], axis=1)


def tempo_splice(instants, i, k):
    return splice(instants, i, k)


def duration_pairs(durations):
    """(n, 2) rows of ``(d_j, d_j - d_{j-1})``, difference 0 for the first phone."""
    d = np.asarray(durations, dtype=np.float64)
    diff = np.zeros_like(d)
    diff[1:] = d[1:] - d[:-1]
    return np.column_stack([d, diff])


def duration_vector(durations, i, k):
    return splice(duration_pairs(durations), i, k)


# ---------------------------------------------------------------------------
# Pitch
# ---------------------------------------------------------------------------


def pitch_phone_average(pitch, frange):
    """Column means of pitch frames in ``frange`` (clamped to the file)."""
    lo, hi = frange
    lo, hi = max(lo, 0), min(hi, pitch.n_frames)
    if hi <= lo:
        warnings.warn(f"pitch frames [{frange[0]}, {frange[1]}) fall outside the pitch track", FeatureWarning, stacklevel=2)
        return np.zeros(PITCH_DIM)
    return pitch.values[lo:hi].mean(axis=0)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def normalize_slots(slots):
    slots = tuple(slots)
    bad = [s for s in slots if s not in SLOT_ORDER]
    if bad:
        raise ValueError(f"unknown feature slot(s) {bad}; choose from {SLOT_ORDER}")
    if "tempo" in slots and "dur" in slots:
        raise ValueError("slots 'tempo' and 'dur' are alternatives; pick one")
    if not slots:
        raise ValueError("at least one feature slot is required")
    return tuple(s for s in SLOT_ORDER if s in slots)


def slot_widths(slots, k=2, dim=32):
    widths = {"gop": 1, "tempo": 2 * (2 * k + 1), "dur": 2 * (2 * k + 1), "phonemb": dim, "pitch": PITCH_DIM}
    return {s: widths[s] for s in normalize_slots(slots)}


def make_layout(slots, k=2, dim=32):
    """Ordered ``{slot: (offset, width)}`` for the active slots."""
    layout, off = {}, 0
    for s, w in slot_widths(slots, k, dim).items():
        layout[s] = (off, w)
        off += w
    return layout


@dataclass(frozen=True, eq=False)
class PhoneFeatureMatrix:
    """``rows`` is (n_phones + 1, d); the last row stands for the end symbol."""

    rows: np.ndarray
    layout: dict
    language: str
    k: int = 2
    dim: int = 32
    utt_id: str = None
    meta: dict = field(default_factory=dict)

    @property
    def width(self):
        return self.rows.shape[1]

    @property
    def n_phones(self):
        return self.rows.shape[0] - 1

    def slot(self, name):
        off, w = self.layout[name]
        return self.rows[:, off : off + w]


def assemble(
    utt,
    post,
    pitch=None,
    emb=None,
    slots=("gop", "tempo", "phonemb", "pitch"),
    gop_cfg=GopConfig(),
    tempo_cfg=TempoConfig(),
):
    """Build the per-phone feature sequence of one utterance.

    Row ``i`` concatenates the active slots of phone ``i`` in the fixed
    order gop, tempo|dur, phonemb, pitch. A final row holds the language's
    end-symbol embedding in the phonemb slot and zeros elsewhere.
    """
    slots = normalize_slots(slots)
    k = tempo_cfg.k
    dim = emb.dim if emb is not None else 0
    if "phonemb" in slots and emb is None:
        raise ValidationError("phonemb slot active but no embedding matrix given")
    if "pitch" in slots and pitch is None:
        raise ValidationError(f"utterance {utt.id}: pitch slot active but no pitch frames")
    layout = make_layout(slots, k, dim)
    n = len(utt.phones)
    rows = np.zeros((n + 1, sum(w for _, w in layout.values())))
    ranges = [segment_frames(seg, post.step) for seg in utt.phones]

    if "gop" in slots:
        off, _ = layout["gop"]
        for i, (seg, fr) in enumerate(zip(utt.phones, ranges)):
            if fr[1] > post.n_frames:
                raise ValidationError(f"utterance {utt.id}: segment {i} exceeds the posterior frames")
            rows[i, off] = compute_gop(post, fr, post.column(seg.phone), gop_cfg)
    durations = utt.durations
    if "tempo" in slots:
        off, w = layout["tempo"]
        rows[:n, off : off + w] = splice_all(tempo_instants(durations, tempo_cfg), k)
    if "dur" in slots:
        off, w = layout["dur"]
        rows[:n, off : off + w] = splice_all(duration_pairs(durations), k)
    if "phonemb" in slots:
        off, w = layout["phonemb"]
        for i, seg in enumerate(utt.phones):
            rows[i, off : off + w] = emb.lookup(seg.phone)
        rows[n, off : off + w] = emb.lookup(eos_symbol(utt.language))
    if "pitch" in slots:
        off, w = layout["pitch"]
        for i, seg in enumerate(utt.phones):
            rows[i, off : off + w] = pitch_phone_average(pitch, segment_frames(seg, pitch.step))
    if not np.all(np.isfinite(rows)):
        raise ValidationError(f"utterance {utt.id}: non-finite feature values")
    return PhoneFeatureMatrix(rows, layout, utt.language, k, dim, utt.id)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _layout_str(layout):
    return ",".join(f"{s}:{off}:{w}" for s, (off, w) in layout.items())


def _column_names(layout):
    names = []
    for s, (_, w) in layout.items():
        names.extend([s] if w == 1 else [f"{s}{j}" for j in range(w)])
    return names


def write_features(fm, path):
    """Header ``#layout=...;k=..;dim=..;language=..;id=..``, column names, rows."""
    header = f"#layout={_layout_str(fm.layout)};k={fm.k};dim={fm.dim};language={fm.language}"
    if fm.utt_id is not None:
        header += f";id={fm.utt_id}"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        fh.write(",".join(_column_names(fm.layout)) + "\n")
        for row in fm.rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_features(path):
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 3 or not lines[0].startswith("#layout="):
        raise FormatError("feature file needs '#layout=' header, names and rows", path, 1)
    fields = dict(kv.split("=", 1) for kv in lines[0][1:].split(";"))
    layout = {}
    try:
        for item in fields["layout"].split(","):
            s, off, w = item.split(":")
            layout[s] = (int(off), int(w))
        k, dim, language = int(fields["k"]), int(fields["dim"]), fields["language"]
    except (KeyError, ValueError):
        raise FormatError("malformed feature header", path, 1) from None
    width = sum(w for _, w in layout.values())
    rows = np.empty((len(lines) - 2, width))
    for i, ln in enumerate(lines[2:]):
        cells = ln.split(",")
        if len(cells) != width:
            raise FormatError(f"expected {width} columns, got {len(cells)}", path, i + 3)
        try:
            rows[i] = [float(c) for c in cells]
        except ValueError:
            raise FormatError("non-numeric cell", path, i + 3) from None
    return PhoneFeatureMatrix(rows, layout, language, k, dim, fields.get("id"))
