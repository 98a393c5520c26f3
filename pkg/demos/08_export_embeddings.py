"""Real [CLS] vectors: export from a frozen encoder, train on the files.

The hash provider stands in for pre-trained encoders at desk scale; the
clsexport package replaces it with the real thing.  It reads the same
corpus JSONL, runs a frozen encoder over every sentence (alone, and
paired with a neighbor), and writes the same T2EMB files the trainer
loads.  Everything below runs offline: the "pre-trained" encoder is a
tiny randomly initialized one saved to a temp directory first.
"""

import json
import os
import tempfile

import torch
from transformers import BertConfig, BertModel, BertTokenizer
from transformers.utils import logging as hf_logging

from clsexport import ExportJob, export
from topseg import compose_document_matrix, load_corpus, load_embedding_store

hf_logging.set_verbosity_error()
hf_logging.disable_progress_bar()

work = tempfile.mkdtemp(prefix="export-demo-")

# A miniature encoder with a 27-token vocabulary, saved like any
# published checkpoint.  Swap this path for a real model id (bert-base-
# uncased and friends) when a download is acceptable.
vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
         "the", "cat", "sat", "on", "mat", "dog", "ran", "##s", "a", ".",
         "rivers", "flood", "plains", "storms", "pass", "quickly",
         "markets", "trade", "goods", "maps", "guide", "travelers"]
encoder_dir = os.path.join(work, "encoder")
torch.manual_seed(0)
BertModel(BertConfig(vocab_size=len(vocab), hidden_size=16,
                     num_hidden_layers=1, num_attention_heads=2,
                     intermediate_size=32,
                     max_position_embeddings=48)).save_pretrained(encoder_dir)
BertTokenizer(vocab={w: i for i, w in enumerate(vocab)}).save_pretrained(encoder_dir)

# Two documents in the corpus JSONL format the whole toolkit shares.
corpus_path = os.path.join(work, "corpus.jsonl")
docs = [
    {"id": "rivers-then-markets",
     "sentences": ["rivers flood plains .", "storms pass quickly .",
                   "markets trade goods .", "maps guide travelers ."],
     "boundaries": [1, 0, 1, 0], "topics": [0, 0, 1, 1]},
    {"id": "cats-and-dogs",
     "sentences": ["the cat sat on a mat .", "a dog ran .", "the cats sat ."],
     "boundaries": [1, 0, 0], "topics": [2, 2, 2]},
]
with open(corpus_path, "w", encoding="utf-8") as fh:
    for doc in docs:
        fh.write(json.dumps(doc) + "\n")

# One export job per embedding kind.  The pairwise kind feeds each
# sentence and its successor through the encoder's two-segment input
# convention; the last sentence pairs with the empty string.
single_path = os.path.join(work, "single.t2emb")
pairwise_path = os.path.join(work, "pairwise.t2emb")
for kind, path in (("single", single_path), ("pairwise", pairwise_path)):
    result = export(ExportJob(corpus=corpus_path, model=encoder_dir,
                              kind=kind, output=path, batch_size=4))
    print(f"{kind}: {result.rows} rows of {result.dim} dims, "
          f"{result.zero_substitutions} substitutions")

# The files load exactly like hash-provider output.
single = load_embedding_store(single_path, expect_kind="single")
pairwise = load_embedding_store(pairwise_path, expect_kind="pairwise")
for doc in load_corpus(corpus_path):
    matrix = compose_document_matrix(doc, single, pairwise, cap=48)
    print(f"{doc.id}: S is {matrix.S.shape[0]} x {matrix.S.shape[1]} "
          "(single block | pairwise block)")
