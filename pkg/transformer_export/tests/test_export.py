"""End-to-end export tests, including the interchange round-trip into the
consumer package and the masked-score plausibility probes."""

import json
import os

import pytest

from iggy_export.cli import main
from iggy_export.export import ExportRequest, export_corpus, validate_interchange
from iggy_export.model import load_checkpoint
from iggy_export.scoring import masked_word_scores
from iggy_export.words import word_tokens

HERE = os.path.dirname(__file__)
PROBE_CORPUS = os.path.abspath(os.path.join(HERE, "..", "..", "fixtures", "probe",
                                            "probe_corpus.jsonl"))
PROBE_PAIRS = os.path.abspath(os.path.join(HERE, "..", "..", "fixtures", "probe",
                                           "probe_pairs.json"))
MODELS = os.path.join(HERE, "..", "src", "iggy_export", "models")


@pytest.fixture(scope="module", params=["bert", "scibert", "gpt2"])
def exported(request, tmp_path_factory):
    out = tmp_path_factory.mktemp("export") / f"{request.param}.jsonl"
    req = ExportRequest(corpus=PROBE_CORPUS, model_tag=request.param,
                        out_path=str(out),
                        embeddings=request.param != "gpt2")
    summary = export_corpus(req)
    assert summary["written"] == 50
    assert summary["skipped"] == 0
    return request.param, str(out)


def test_validator_passes_own_output(exported):
    _, path = exported
    assert validate_interchange(path) == []


def test_roundtrip_into_consumer(exported):
    """Acceptance: consumer ingestion accepts the export with zero errors."""
    from iggy.lm import import_external_scores

    tag, path = exported
    table = import_external_scores(path)
    assert table.model_tag == tag
    assert len(table.ids()) == 50
    if tag != "gpt2":
        assert table.embedding_dim is not None
        assert len(table.embeddings) == 50


def test_word_counts_match_consumer_tokenizer(exported):
    """Acceptance: per-word score counts equal consumer tokenization, 50/50."""
    from iggy.corpus import tokenize, words_of

    _, path = exported
    titles = {}
    with open(PROBE_CORPUS, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            titles[str(obj["id"])] = obj["title"]
    matched = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            words = words_of(tokenize(titles[obj["id"]]))
            assert obj["tokens"] == words
            if len(obj["scores"]) == len(words):
                matched += 1
    assert matched == 50


def test_probe_pairs():
    """Acceptance: masked score of the in-context common word is lower than
    the rare substitute for at least 8 of the 10 shipped probe pairs."""
    model, vocab, _ = load_checkpoint(os.path.join(MODELS, "tiny_mlm.pt"))
    with open(PROBE_PAIRS, encoding="utf-8") as fh:
        pairs = json.load(fh)
    assert len(pairs) == 10
    wins = 0
    for pair in pairs:
        words = word_tokens(pair["context"])
        pos = pair["position"]
        assert words[pos] == pair["common"]
        common = masked_word_scores(model, vocab, words)[pos]
        substituted = words[:pos] + [pair["rare"]] + words[pos + 1:]
        rare = masked_word_scores(model, vocab, substituted)[pos]
        wins += common < rare
    assert wins >= 8
    print(f"ACCEPTANCE probe-pairs: PASS ({wins}/10 common < rare)")


def test_empty_title_record(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"id": "e", "title": "???"}) + "\n")
    out = tmp_path / "out.jsonl"
    export_corpus(ExportRequest(corpus=str(corpus), model_tag="bert",
                                out_path=str(out)))
    record = json.loads(out.read_text())
    assert record["tokens"] == []
    assert record["scores"] == []


def test_rerun_deterministic(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text("\n".join(
        json.dumps({"id": f"d{i}", "title": t}) for i, t in enumerate(
            ["the cat sat", "a dog ran near the river"])) + "\n")
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        export_corpus(ExportRequest(corpus=str(corpus), model_tag="bert",
                                    out_path=str(out), embeddings=True))
    assert a.read_bytes() == b.read_bytes()


def test_embeddings_rejected_for_causal(tmp_path):
    with pytest.raises(ValueError, match="bidirectional"):
        export_corpus(ExportRequest(corpus=PROBE_CORPUS, model_tag="gpt2",
                                    out_path=str(tmp_path / "x.jsonl"),
                                    embeddings=True))


def test_validator_flags_problems(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join([
        json.dumps({"id": "a", "model": "bert", "tokens": ["x", "y"],
                    "scores": [1.0]}),
        json.dumps({"id": "a", "model": "bert", "tokens": ["x"],
                    "scores": [-0.5]}),
        json.dumps({"id": "b", "model": "gpt2", "tokens": [], "scores": []}),
    ]) + "\n")
    problems = validate_interchange(str(bad))
    text = "\n".join(problems)
    assert "tokens vs" in text or "1 scores" in text
    assert "duplicate id" in text
    assert "below 0" in text
    assert "mixed model tags" in text


def test_cli_end_to_end(tmp_path):
    out = tmp_path / "cli.jsonl"
    assert main(["--model", "scibert", "--corpus", PROBE_CORPUS,
                 "--out", str(out), "--embeddings"]) == 0
    assert main(["--model", "bert", "--corpus", "/nonexistent.jsonl",
                 "--out", str(tmp_path / "y.jsonl")]) == 2
    assert main(["--model", "bert", "--corpus", PROBE_CORPUS,
                 "--out", str(out), "--validate-only", str(out)]) == 0


def test_overlong_title_skipped_with_log(tmp_path, caplog):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text("\n".join([
        json.dumps({"id": "ok", "title": "the cat sat"}),
        json.dumps({"id": "huge", "title": "zqxvj" * 40}),
    ]) + "\n")
    out = tmp_path / "out.jsonl"
    summary = export_corpus(ExportRequest(corpus=str(corpus), model_tag="bert",
                                          out_path=str(out)))
    assert summary == {"written": 1, "skipped": 1, "titles": 2}
    assert "huge" in "\n".join(r.message for r in caplog.records)
    ids = [json.loads(line)["id"] for line in out.read_text().splitlines()]
    assert ids == ["ok"]
