"""Glue between files on disk and in-memory datasets."""

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .corpus import METRICS, check_frame_bounds, load_manifest, load_pitch, load_posteriors
from .features import GopConfig, TempoConfig, assemble, normalize_slots, read_features, write_features
from .scoring.data import make_examples


def extract_one(utt, emb=None, slots=("gop", "tempo", "phonemb", "pitch"), gop_cfg=GopConfig(),
                tempo_cfg=TempoConfig(), posteriors=None, pitch=None):
    slots = normalize_slots(slots)
    post = posteriors if posteriors is not None else load_posteriors(utt.posterior_path())
    check_frame_bounds(utt, post.n_frames, post.step)
    if "pitch" in slots and pitch is None and utt.pitch_ref is not None:
        pitch = load_pitch(utt.pitch_path())
    return assemble(utt, post, pitch, emb, slots, gop_cfg, tempo_cfg)


def _extract_star(args):
    return extract_one(*args)


def extract(utterances, emb=None, slots=("gop", "tempo", "phonemb", "pitch"), gop_cfg=GopConfig(),
            tempo_cfg=TempoConfig(), jobs=1, in_memory=None):
    """Feature matrices for ``utterances`` in order.

    ``in_memory`` may be a :class:`~polyscore.synth.SynthCorpus` whose
    posterior/pitch arrays are used instead of reading files.
    """
    if in_memory is not None:
        return [
            extract_one(u, emb, slots, gop_cfg, tempo_cfg, in_memory.posteriors[u.id], in_memory.pitch[u.id])
            for u in utterances
        ]
    args = [(u, emb, slots, gop_cfg, tempo_cfg) for u in utterances]
    if jobs <= 1:
        return [_extract_star(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_extract_star, args, chunksize=16))


def feature_path(feat_dir, utt_id):
    return Path(feat_dir) / f"{utt_id}.feat"


def save_features(mats, feat_dir):
    feat_dir = Path(feat_dir)
    feat_dir.mkdir(parents=True, exist_ok=True)
    for fm in mats:
        write_features(fm, feature_path(feat_dir, fm.utt_id))


def load_dataset(manifest, table, feat_dir, metrics=None, mode="mean"):
    """Utterances of ``manifest`` joined with their extracted feature files."""
    utts = load_manifest(manifest, table, check_frames=False)
    mats = [read_features(feature_path(feat_dir, u.id)) for u in utts]
    return utts, mats, make_examples(utts, mats, metrics or METRICS, mode)
