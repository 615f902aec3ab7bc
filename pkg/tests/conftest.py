import json
import sys

import numpy as np
import pytest

from polyscore.phonemb import build_table
from polyscore.synth import SynthConfig, default_table, generate


@pytest.fixture(scope="session")
def table():
    return default_table()


@pytest.fixture
def tiny_table():
    return build_table({"en": ["AA", "AE", "B"], "my": ["a", "i"]})


@pytest.fixture(scope="session")
def synth_en(tmp_path_factory, table):
    """Small on-disk English corpus shared by read-only tests."""
    out = tmp_path_factory.mktemp("synth_en")
    cfg = SynthConfig(language="en", n_utterances=24, seed=5, corpus_lines=60)
    return generate(cfg, table, out)


def write_manifest_lines(path, objs):
    path.write_text("".join(json.dumps(o) + "\n" for o in objs), encoding="utf-8")


def make_utt_obj(uid="u1", phones=None, scores=None, **extra):
    phones = phones or [
        {"phone": "en_AA", "start": 0.0, "dur": 0.03},
        {"phone": "en_AE", "start": 0.03, "dur": 0.02},
    ]
    scores = scores or {
        "pronunciation": [7, 8],
        "rhythm": [6, 7],
        "intonation": [7, 7],
        "scale_min": 1,
        "scale_max": 10,
    }
    obj = {"id": uid, "language": "en", "phones": phones, "scores": scores, "posterior_ref": f"post/{uid}.csv"}
    obj.update(extra)
    return obj


def write_posterior_file(path, labels, rows, step_ms=10):
    path.parent.mkdir(parents=True, exist_ok=True)
    body = "\n".join(",".join(repr(float(v)) for v in r) for r in np.atleast_2d(rows))
    path.write_text(f"#step_ms={step_ms}\n" + ",".join(labels) + "\n" + body + "\n", encoding="utf-8")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: int(k[1:])):
        terminalreporter.write_line(results[key])
