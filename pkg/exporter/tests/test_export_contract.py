"""Release gate: exported files must drive the segmentation toolkit.

Both embedding kinds are exported for the five-document toy corpus with
a real (tiny, locally saved) encoder, loaded back through the consumer
package's own readers, and pushed through a full training run.  Loading
with the right kind, width, and per-document row counts plus a clean
end-to-end optimization is the whole contract between the two projects.
"""

import numpy as np
import pytest

import topseg
from clsexport import ExportJob, export


@pytest.fixture
def note(request):
    def set_note(text):
        request.config._exporter_notes[request.node.name] = text
    return set_note


def test_exported_embeddings_drive_training(toy_corpus, encoder_dir, tmp_path, note):
    single_path = str(tmp_path / "single.t2emb")
    pairwise_path = str(tmp_path / "pairwise.t2emb")
    export(ExportJob(corpus=toy_corpus, model=encoder_dir, kind="single",
                     output=single_path, batch_size=3))
    export(ExportJob(corpus=toy_corpus, model=encoder_dir, kind="pairwise",
                     output=pairwise_path, batch_size=3))

    single = topseg.load_embedding_store(single_path, expect_kind="single")
    pairwise = topseg.load_embedding_store(pairwise_path, expect_kind="pairwise")
    docs = topseg.load_corpus(toy_corpus)
    assert len(docs) == 5
    assert single.kind == "single" and pairwise.kind == "pairwise"
    assert single.dim == 16 and pairwise.dim == 16
    for doc in docs:
        assert single.rows(doc.id).shape == (doc.n, 16)
        assert pairwise.rows(doc.id).shape == (doc.n, 16)

    model_cfg = topseg.ModelConfig(d_in=32, n_topics=3, d_model=16, n_layers=1,
                                   n_heads=2, d_ffn=32, max_len=8, dropout=0.0)
    train_cfg = topseg.TrainConfig(batch_size=2, max_epochs=2, patience=2, seed=0)
    result = topseg.train(docs[:4], docs[4:], single, pairwise,
                          model_cfg, train_cfg)
    assert np.isfinite(result.best_val_pk)
    assert result.step_losses and all(np.isfinite(x) for x in result.step_losses)

    report = topseg.evaluate_model(result.params, model_cfg, docs[4:],
                                   single, pairwise)
    assert np.isfinite(report["corpus_pk"])
    total_rows = sum(doc.n for doc in docs)
    note(f"dim 16, {total_rows} rows per kind, 2-epoch train ok, "
         f"val Pk {result.best_val_pk:.3f}")
