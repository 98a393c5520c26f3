"""Shared fixtures: a tiny local encoder, a toy corpus, and byte oracles.

The encoder is a randomly initialized two-segment transformer saved to
disk once per session, so every test runs offline against a real
tokenizer and a real attention stack at toy scale.  The T2EMB parser
here is written independently of the package so file-format tests check
bytes against a second implementation, not against the writer itself.
"""

import json
import struct

import numpy as np
import pytest
import torch

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "cat", "sat", "on", "mat", "dog", "ran", "##s", "a", ".",
    "rivers", "flood", "plains", "storms", "pass", "quickly",
    "markets", "trade", "goods", "maps", "guide", "travelers",
]

HIDDEN = 16
MAX_POSITIONS = 48

TOY_DOCS = [
    {"id": "toy-0",
     "sentences": ["the cat sat on a mat .", "a dog ran .",
                   "rivers flood plains .", "storms pass quickly ."],
     "boundaries": [1, 0, 1, 0], "topics": [0, 0, 1, 1]},
    {"id": "toy-1",
     "sentences": ["markets trade goods .", "maps guide travelers .",
                   "the cats sat .", "a dog sat on a mat .", "the cat ran ."],
     "boundaries": [1, 0, 1, 0, 0], "topics": [2, 2, 0, 0, 0]},
    {"id": "toy-2",
     "sentences": ["storms pass .", "rivers flood .",
                   "markets trade .", "maps guide ."],
     "boundaries": [1, 0, 1, 0], "topics": [1, 1, 2, 2]},
    {"id": "toy-3",
     "sentences": ["a cat ran on plains .", "the dog sat .",
                   "storms flood rivers .", "goods trade quickly .",
                   "travelers guide maps ."],
     "boundaries": [1, 0, 1, 1, 0], "topics": [0, 0, 1, 2, 2]},
    {"id": "toy-4",
     "sentences": ["the mat sat on a cat .", "rivers pass plains .",
                   "markets guide trade .", "a dog ran quickly ."],
     "boundaries": [1, 1, 1, 1], "topics": [0, 1, 2, 0]},
]


@pytest.fixture(scope="session")
def encoder_dir(tmp_path_factory):
    """A tiny pre-trained-style encoder saved with its tokenizer."""
    from transformers import BertConfig, BertModel, BertTokenizer
    target = tmp_path_factory.mktemp("encoder")
    torch.manual_seed(0)
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=HIDDEN,
                        num_hidden_layers=1, num_attention_heads=2,
                        intermediate_size=32,
                        max_position_embeddings=MAX_POSITIONS)
    BertModel(config).save_pretrained(target)
    tokenizer = BertTokenizer(vocab={w: i for i, w in enumerate(VOCAB)})
    tokenizer.save_pretrained(target)
    return str(target)


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    """Five labeled documents whose words the tiny tokenizer knows."""
    path = tmp_path_factory.mktemp("corpus") / "toy.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for doc in TOY_DOCS:
            fh.write(json.dumps(doc) + "\n")
    return str(path)


@pytest.fixture(scope="session")
def toy_docs():
    return TOY_DOCS


def _read_t2emb(path):
    """Independent T2EMB parser: (kind_byte, dim, [(doc_id, rows)])."""
    with open(path, "rb") as fh:
        data = fh.read()
    assert data[:8] == b"T2EMB001", "bad magic"
    kind = data[8]
    dim, doc_count = struct.unpack_from("<II", data, 9)
    off = 17
    headers = []
    for _ in range(doc_count):
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        doc_id = data[off:off + id_len].decode("utf-8")
        off += id_len
        (n_rows,) = struct.unpack_from("<I", data, off)
        off += 4
        headers.append((doc_id, n_rows))
    docs = []
    for doc_id, n_rows in headers:
        block = np.frombuffer(data, dtype="<f4", count=n_rows * dim, offset=off)
        off += n_rows * dim * 4
        docs.append((doc_id, block.reshape(n_rows, dim).copy()))
    assert off == len(data), "trailing bytes after the last row"
    return kind, dim, docs


@pytest.fixture(scope="session")
def t2emb():
    return _read_t2emb


@pytest.fixture(scope="session")
def direct_encode(encoder_dir):
    """Single-sequence oracle: tokenize, run the encoder, take one row."""
    from transformers import AutoModel, AutoTokenizer
    tokenizer = AutoTokenizer.from_pretrained(encoder_dir)
    model = AutoModel.from_pretrained(encoder_dir).eval()

    def fn(text, text_pair=None, pooled=False, limit=MAX_POSITIONS):
        enc = tokenizer(text, text_pair=text_pair, truncation=True,
                        max_length=limit, return_tensors="pt")
        with torch.inference_mode():
            out = model(**enc)
        vec = out.pooler_output if pooled else out.last_hidden_state[:, 0, :]
        return vec[0].cpu().numpy().astype(np.float32)

    return fn


CONTRACT_MODULE = "test_export_contract.py"
CONTRACT_TEST = "test_exported_embeddings_drive_training"


def pytest_configure(config):
    config._exporter_notes = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdict = None
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if CONTRACT_MODULE not in report.nodeid:
                continue
            if report.nodeid.split("::")[-1] != CONTRACT_TEST:
                continue
            if verdict != "FAIL":
                verdict = "PASS" if status == "passed" else "FAIL"
    if verdict is None:
        return
    note = getattr(config, "_exporter_notes", {}).get(CONTRACT_TEST, "")
    terminalreporter.write_line(
        f"exporter criterion:\n  {verdict:7s} exporter contract"
        + (f" ({note})" if note else ""))
