"""Utterance manifests, posterior matrices, pitch frames and rater scores.

File formats (UTF-8, LF):

manifest (``.jsonl``), one utterance per line::

    {"id": "u1", "language": "en",
     "phones": [{"phone": "en_AA", "start": 0.0, "dur": 0.12}, ...],
     "scores": {"pronunciation": [7, 8], "rhythm": [6, 7], "intonation": [7, 7],
                "scale_min": 1, "scale_max": 10},
     "posterior_ref": "posteriors/u1.csv", "pitch_ref": "pitch/u1.csv"}

posterior file::

    #step_ms=10
    en_AA,en_AE,en_B
    0.9,0.05,0.05
    ...

pitch file (raw log pitch, normalized log pitch, delta log pitch, NCCF)::

    #step_ms=10
    5.29,0.01,0.0,0.81
    ...

Relative ``posterior_ref``/``pitch_ref`` paths resolve against the
manifest's directory.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, UnknownSymbolError, ValidationError

METRICS = ("pronunciation", "rhythm", "intonation")
ROW_SUM_TOL = 1e-3
ROW_SUM_MIN = 1e-6


@dataclass(frozen=True)
class PhoneSegment:
    phone: str
    start: float
    duration: float

    @property
    def end(self):
        return self.start + self.duration


@dataclass(frozen=True)
class ScoreRecord:
    pronunciation: tuple
    rhythm: tuple
    intonation: tuple
    scale_min: float
    scale_max: float

    def __post_init__(self):
        if not self.scale_max > self.scale_min:
            raise ValidationError(f"scale_max ({self.scale_max}) must exceed scale_min ({self.scale_min})")
        for metric in METRICS:
            raters = getattr(self, metric)
            if len(raters) < 1:
                raise ValidationError(f"no rater scores for {metric}")
            for s in raters:
                if not (self.scale_min <= s <= self.scale_max):
                    raise ValidationError(
                        f"{metric} score {s} outside scale [{self.scale_min}, {self.scale_max}]"
                    )

    def raters(self, metric):
        return getattr(self, metric)


@dataclass(frozen=True)
class Utterance:
    id: str
    language: str
    phones: tuple
    scores: ScoreRecord
    posterior_ref: str
    pitch_ref: str = None
    base_dir: Path = None

    @property
    def durations(self):
        return np.array([seg.duration for seg in self.phones])

    def posterior_path(self):
        return _resolve(self.posterior_ref, self.base_dir)

    def pitch_path(self):
        return None if self.pitch_ref is None else _resolve(self.pitch_ref, self.base_dir)


def _resolve(ref, base_dir):
    p = Path(ref)
    if base_dir is not None and not p.is_absolute():
        p = Path(base_dir) / p
    return p


@dataclass(frozen=True, eq=False)
class PosteriorMatrix:
    step: float
    phone_labels: tuple
    values: np.ndarray

    @property
    def n_frames(self):
        return self.values.shape[0]

    def column(self, phone):
        try:
            return self.phone_labels.index(phone)
        except ValueError:
            raise UnknownSymbolError(f"phone {phone!r} is not a posterior column") from None


@dataclass(frozen=True, eq=False)
class PitchFrames:
    step: float
    values: np.ndarray

    @property
    def n_frames(self):
        return self.values.shape[0]


def segment_frames(seg, step):
    """Half-open frame range covered by ``seg``.

    Boundaries round half up; a range that would be empty is widened to one
    frame so no phone is dropped.

    >>> segment_frames(PhoneSegment("en_AA", 0.10, 0.20), 0.01)
    (10, 30)
    >>> segment_frames(PhoneSegment("en_AA", 0.005, 0.004), 0.01)
    (1, 2)
    """
    if step <= 0:
        raise ValueError("frame step must be positive")
    # the 1e-9 nudge keeps exact halves (0.005/0.01) from rounding down
    lo = math.floor(seg.start / step + 0.5 + 1e-9)
    hi = math.floor((seg.start + seg.duration) / step + 0.5 + 1e-9)
    if hi <= lo:
        hi = lo + 1
    return lo, hi


# ---------------------------------------------------------------------------
# Frame files
# ---------------------------------------------------------------------------


def _read_step(line, path):
    if not line.startswith("#step_ms="):
        raise FormatError("expected '#step_ms=<int>' header", path, 1)
    try:
        step_ms = int(line[len("#step_ms=") :].strip())
    except ValueError:
        raise FormatError("malformed '#step_ms=' header", path, 1) from None
    if step_ms <= 0:
        raise FormatError("step_ms must be positive", path, 1)
    return step_ms / 1000.0


def _parse_rows(lines, first_lineno, width, path):
    rows = np.empty((len(lines), width))
    for i, ln in enumerate(lines):
        cells = ln.split(",")
        if len(cells) != width:
            raise FormatError(f"expected {width} columns, got {len(cells)}", path, first_lineno + i)
        try:
            rows[i] = [float(c) for c in cells]
        except ValueError:
            raise FormatError("non-numeric cell", path, first_lineno + i) from None
    return rows


def _read_lines(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def load_posteriors(path):
    lines = _read_lines(path)
    if len(lines) < 2:
        raise FormatError("posterior file needs a header and a label line", path)
    step = _read_step(lines[0], path)
    labels = tuple(s.strip() for s in lines[1].split(","))
    if len(set(labels)) != len(labels) or not all(labels):
        raise FormatError("phone labels must be unique and non-empty", path, 2)
    prefixes = {lab.split("_", 1)[0] for lab in labels}
    if len(prefixes) != 1 or any("_" not in lab for lab in labels):
        raise FormatError("phone labels must all carry the same language prefix", path, 2)
    body = [ln for ln in lines[2:] if ln.strip()]
    values = _parse_rows(body, 3, len(labels), path)
    if values.size and (not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1):
        raise FormatError("posterior entries must lie in [0, 1]", path)
    sums = values.sum(axis=1)
    for i, s in enumerate(sums):
        if s < ROW_SUM_MIN:
            raise FormatError(f"posterior row sums to {s:g}", path, 3 + i)
        if abs(s - 1.0) > ROW_SUM_TOL + 1e-12:  # slack so a row summing to exactly 0.999 passes
            raise FormatError(f"posterior row sums to {s:.6f}, not 1 within {ROW_SUM_TOL}", path, 3 + i)
    values = values / sums[:, None]
    values.setflags(write=False)
    return PosteriorMatrix(step, labels, values)


def load_pitch(path):
    lines = _read_lines(path)
    if not lines:
        raise FormatError("empty pitch file", path)
    step = _read_step(lines[0], path)
    body = [ln for ln in lines[1:] if ln.strip()]
    values = _parse_rows(body, 2, 4, path)
    if not np.all(np.isfinite(values)):
        raise FormatError("pitch entries must be finite", path)
    values.setflags(write=False)
    return PitchFrames(step, values)


def _fmt(v):
    return repr(float(v))


def write_posteriors(post, path, precision=None):
    fmt = _fmt if precision is None else (lambda v: f"{v:.{precision}g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#step_ms={round(post.step * 1000)}\n")
        fh.write(",".join(post.phone_labels) + "\n")
        for row in post.values:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_pitch(pitch, path, precision=None):
    fmt = _fmt if precision is None else (lambda v: f"{v:.{precision}g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#step_ms={round(pitch.step * 1000)}\n")
        for row in pitch.values:
            fh.write(",".join(fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


def _utterance_from_obj(obj, table, base_dir):
    try:
        uid = obj["id"]
        lang = obj["language"]
        raw_phones = obj["phones"]
        raw_scores = obj["scores"]
        posterior_ref = obj["posterior_ref"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"missing field {exc}") from None
    if not isinstance(uid, str) or not uid:
        raise ValidationError("utterance id must be a non-empty string")
    if lang not in table.languages:
        raise ValidationError(f"utterance {uid}: language {lang!r} not in phoneme table")
    if not raw_phones:
        raise ValidationError(f"utterance {uid}: no phones")
    phones = []
    for p in raw_phones:
        seg = PhoneSegment(str(p["phone"]), float(p["start"]), float(p["dur"]))
        if not table.owns(lang, seg.phone):
            raise UnknownSymbolError(f"utterance {uid}: unknown phoneme {seg.phone!r} for language {lang}")
        if seg.start < 0 or not seg.duration > 0:
            raise ValidationError(f"utterance {uid}: segment {seg.phone} needs start >= 0 and dur > 0")
        if phones and seg.start < phones[-1].end - 1e-9:
            raise ValidationError(
                f"utterance {uid}: segment {seg.phone} at {seg.start} overlaps or precedes the previous one"
            )
        phones.append(seg)
    try:
        scores = ScoreRecord(
            tuple(float(s) for s in raw_scores["pronunciation"]),
            tuple(float(s) for s in raw_scores["rhythm"]),
            tuple(float(s) for s in raw_scores["intonation"]),
            float(raw_scores["scale_min"]),
            float(raw_scores["scale_max"]),
        )
    except KeyError as exc:
        raise ValidationError(f"utterance {uid}: missing score field {exc}") from None
    except ValidationError as exc:
        raise ValidationError(f"utterance {uid}: {exc}") from None
    return Utterance(uid, lang, tuple(phones), scores, posterior_ref, obj.get("pitch_ref"), base_dir)


def check_frame_bounds(utt, n_frames, step):
    for seg in utt.phones:
        lo, hi = segment_frames(seg, step)
        if hi > n_frames:
            raise ValidationError(
                f"utterance {utt.id}: segment {seg.phone} covers frames [{lo}, {hi}) "
                f"beyond the {n_frames} posterior frames"
            )


def _posterior_shape(path):
    with open(path, encoding="utf-8") as fh:
        step = _read_step(fh.readline(), path)
        fh.readline()
        n = sum(1 for ln in fh if ln.strip())
    return n, step


def load_manifest(path, table, check_frames=True):
    """Parse and validate a manifest; utterances come back in file order.

    With ``check_frames`` the posterior files are opened (header and row
    count only) to verify that every segment fits inside them.
    """
    path = Path(path)
    base_dir = path.parent
    utterances, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", path, lineno) from None
            try:
                utt = _utterance_from_obj(obj, table, base_dir)
                if utt.id in seen:
                    raise ValidationError(f"duplicate utterance id {utt.id!r}")
                if check_frames:
                    ppath = utt.posterior_path()
                    if not ppath.exists():
                        raise ValidationError(f"utterance {utt.id}: posterior file {ppath} not found")
                    n, step = _posterior_shape(ppath)
                    check_frame_bounds(utt, n, step)
            except (ValidationError, ValueError, TypeError) as exc:
                err = type(exc) if isinstance(exc, ValidationError) else ValidationError
                raise err(f"{path}:{lineno}: {exc}") from None
            seen.add(utt.id)
            utterances.append(utt)
    return utterances


def utterance_to_obj(utt):
    s = utt.scores
    obj = {
        "id": utt.id,
        "language": utt.language,
        "phones": [{"phone": p.phone, "start": p.start, "dur": p.duration} for p in utt.phones],
        "scores": {m: list(s.raters(m)) for m in METRICS},
        "posterior_ref": utt.posterior_ref,
    }
    obj["scores"]["scale_min"] = s.scale_min
    obj["scores"]["scale_max"] = s.scale_max
    if utt.pitch_ref is not None:
        obj["pitch_ref"] = utt.pitch_ref
    return obj


def write_manifest(utterances, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for utt in utterances:
            fh.write(json.dumps(utterance_to_obj(utt), ensure_ascii=False) + "\n")
