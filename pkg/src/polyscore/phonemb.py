"""Multilingual phoneme table and skip-gram phoneme embeddings.

Every language-specific phoneme is prefixed with its language tag
(``en_AA``, ``my_a``, ``ta_k``) so identical base symbols from different
languages never collide. The merged table also carries one end-of-utterance
symbol per language (``<eos:en>``) and a shared ``<unk>``.
"""

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import FormatError, TableError

UNK = "<unk>"
_LANG_RE = re.compile(r"^[a-z]{2,3}$")
_EOS_RE = re.compile(r"^<eos:([a-z]{2,3})>$")


def eos_symbol(language):
    return f"<eos:{language}>"


def is_special(symbol):
    return symbol == UNK or _EOS_RE.match(symbol) is not None


class MultilingualPhonemeTable:
    """Ordered, immutable symbol inventory with a symbol -> index map."""

    def __init__(self, entries):
        entries = tuple(entries)
        index = {}
        for i, sym in enumerate(entries):
            if sym in index:
                raise TableError(f"duplicate symbol {sym!r} in phoneme table")
            index[sym] = i
        if UNK not in index:
            raise TableError("phoneme table lacks <unk>")
        languages = []
        for sym in entries:
            m = _EOS_RE.match(sym)
            if m:
                languages.append(m.group(1))
        for sym in entries:
            if is_special(sym):
                continue
            owners = [lang for lang in languages if sym.startswith(lang + "_")]
            if len(owners) != 1 or len(sym) == len(owners[0]) + 1:
                raise TableError(f"symbol {sym!r} does not carry exactly one known language prefix")
        self.entries = entries
        self.index = index
        self.languages = tuple(languages)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, symbol):
        return symbol in self.index

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other):
        return isinstance(other, MultilingualPhonemeTable) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return f"MultilingualPhonemeTable({len(self)} symbols, languages={self.languages})"

    def index_of(self, symbol):
        return self.index[symbol]

    def language_phones(self, language):
        """Prefixed, non-special symbols of one language in table order."""
        prefix = language + "_"
        return [s for s in self.entries if not is_special(s) and s.startswith(prefix)]

    def owns(self, language, symbol):
        return symbol in self.index and not is_special(symbol) and symbol.startswith(language + "_")


def build_table(per_language):
    """Merge per-language phoneme lists into one prefixed table.

    ``per_language`` maps a language tag to its (unprefixed) symbol list.
    Order: every language's phones in mapping order, then one ``<eos>`` per
    language, then ``<unk>``.

    >>> build_table({"en": ["AA", "AE"], "my": ["a", "i"]}).entries
    ('en_AA', 'en_AE', 'my_a', 'my_i', '<eos:en>', '<eos:my>', '<unk>')
    """
    entries = []
    for lang, symbols in per_language.items():
        if not _LANG_RE.match(lang):
            raise TableError(f"language tag {lang!r} must be 2-3 lowercase letters")
        seen = set()
        for sym in symbols:
            if not sym or any(ch.isspace() for ch in sym) or "," in sym:
                raise TableError(f"invalid phoneme symbol {sym!r} for {lang}")
            if sym in seen:
                raise TableError(f"duplicate symbol {sym!r} in {lang} phoneme list")
            seen.add(sym)
            entries.append(f"{lang}_{sym}")
    entries.extend(eos_symbol(lang) for lang in per_language)
    entries.append(UNK)
    return MultilingualPhonemeTable(entries)


def load_inventory(path):
    """Read a per-language phoneme list: one unprefixed symbol per line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]


def save_table(table, path):
    Path(path).write_text("".join(s + "\n" for s in table.entries), encoding="utf-8")


def load_table(path):
    return MultilingualPhonemeTable(load_inventory(path))


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkipgramConfig:
    dim: int = 32
    window: int = 4
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    min_lr: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.dim < 1 or self.epochs < 0:
            raise ValueError("dim must be >= 1 and epochs >= 0")


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    values: np.ndarray
    table: MultilingualPhonemeTable
    losses: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.values.shape[0] != len(self.table):
            raise TableError(
                f"embedding has {self.values.shape[0]} rows but the table has {len(self.table)} symbols"
            )
        if not np.all(np.isfinite(self.values)):
            raise TableError("embedding matrix has non-finite entries")
        self.values.setflags(write=False)

    @property
    def dim(self):
        return self.values.shape[1]

    def lookup(self, symbol):
        """Row for ``symbol``; unknown symbols fall back to ``<unk>``."""
        idx = self.table.index.get(symbol)
        if idx is None:
            warnings.warn(f"unknown phoneme {symbol!r}; using {UNK}", stacklevel=2)
            idx = self.table.index[UNK]
        return self.values[idx]


def lookup(phone, table, emb):
    if emb.table != table:
        raise TableError("embedding matrix was trained on a different phoneme table")
    return emb.lookup(phone)


def _index_corpus(corpus, table):
    unk = table.index[UNK]
    sentences = []
    n_unknown = 0
    for line in corpus:
        ids = []
        for tok in line:
            i = table.index.get(tok)
            if i is None:
                n_unknown += 1
                i = unk
            ids.append(i)
        if ids:
            sentences.append(np.asarray(ids, dtype=np.int64))
    if n_unknown:
        warnings.warn(f"{n_unknown} corpus tokens not in the phoneme table were mapped to {UNK}", stacklevel=3)
    return sentences


def _context_pairs(sentences, window):
    centers, contexts = [], []
    for ids in sentences:
        n = len(ids)
        for off in range(1, window + 1):
            if off >= n:
                break
            # both directions at this offset
            centers.append(ids[:-off])
            contexts.append(ids[off:])
            centers.append(ids[off:])
            contexts.append(ids[:-off])
    if not centers:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


def train_embeddings(corpus, table, cfg=SkipgramConfig()):
    """Skip-gram with negative sampling over phoneme-string sentences.

    ``corpus`` is an iterable of token lists (already prefixed). Negatives
    are drawn from the unigram distribution raised to 3/4. All randomness
    (init, pair order, negatives) is drawn up front from one numpy
    generator, so the result is a pure function of ``cfg.seed``.
    """
    sentences = _index_corpus(corpus, table)
    if not sentences:
        raise ValueError("empty embedding corpus")
    V, D = len(table), cfg.dim
    rng = np.random.default_rng(cfg.seed)
    W = rng.uniform(-0.5 / D, 0.5 / D, size=(V, D))
    C = np.zeros((V, D))

    counts = np.bincount(np.concatenate(sentences), minlength=V).astype(np.float64)
    noise = counts**0.75
    noise /= noise.sum()
    cdf = np.cumsum(noise)
    cdf[-1] = 1.0

    centers, contexts = _context_pairs(sentences, cfg.window)
    n_pairs = len(centers)
    total = max(n_pairs * cfg.epochs, 1)
    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_pairs)
        negs = np.searchsorted(cdf, rng.random((n_pairs, cfg.negatives)), side="right")
        negs = np.minimum(negs, V - 1).astype(np.int64)
        loss = kernels.sgns_pass(
            W,
            C,
            np.ascontiguousarray(centers[order]),
            np.ascontiguousarray(contexts[order]),
            negs,
            cfg.lr,
            cfg.min_lr,
            epoch * n_pairs,
            total,
        )
        losses.append(loss / max(n_pairs, 1))
    return EmbeddingMatrix(W, table, tuple(losses))


def load_corpus(path):
    """One whitespace-separated phoneme string per line."""
    with open(path, encoding="utf-8") as fh:
        return [ln.split() for ln in fh if ln.strip()]


def save_embeddings(emb, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim={emb.dim}\n")
        for sym, row in zip(emb.table.entries, emb.values):
            fh.write(sym + " " + " ".join(repr(float(v)) for v in row) + "\n")


def load_embeddings(path):
    """Inverse of :func:`save_embeddings`; the table is rebuilt from the rows."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#dim="):
        raise FormatError("missing '#dim=<int>' header", path, 1)
    try:
        dim = int(lines[0][len("#dim=") :])
    except ValueError:
        raise FormatError("malformed '#dim=' header", path, 1) from None
    symbols, rows = [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        parts = ln.split()
        if len(parts) != dim + 1:
            raise FormatError(f"expected symbol plus {dim} values, got {len(parts)} fields", path, lineno)
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError:
            raise FormatError("non-numeric embedding value", path, lineno) from None
        symbols.append(parts[0])
    table = MultilingualPhonemeTable(symbols)
    return EmbeddingMatrix(np.asarray(rows, dtype=np.float64).reshape(len(rows), dim), table)
