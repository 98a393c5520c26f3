"""Command line behavior: flags, exit codes, and output summary."""

import clsexport.jobs as jobs_mod
from clsexport.cli import main


def test_single_export_end_to_end(toy_corpus, encoder_dir, tmp_path, capsys):
    out = tmp_path / "single.t2emb"
    code = main(["--corpus", toy_corpus, "--model", encoder_dir,
                 "--kind", "single", "--output", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert out.exists()
    assert "22 rows of 16 dims across 5 docs" in captured.out


def test_orientation_and_batch_flags(toy_corpus, encoder_dir, tmp_path):
    out = tmp_path / "pair.t2emb"
    code = main(["--corpus", toy_corpus, "--model", encoder_dir,
                 "--kind", "pairwise", "--orientation", "backward",
                 "--batch-size", "2", "--output", str(out)])
    assert code == 0 and out.exists()


def test_pooled_flag(toy_corpus, encoder_dir, tmp_path):
    out = tmp_path / "pooled.t2emb"
    code = main(["--corpus", toy_corpus, "--model", encoder_dir,
                 "--kind", "single", "--pooled", "--output", str(out)])
    assert code == 0 and out.exists()


def test_missing_required_flag_is_a_usage_error(capsys):
    code = main(["--kind", "single"])
    assert code == 1
    assert "usage error" in capsys.readouterr().err


def test_unknown_kind_is_a_usage_error(toy_corpus, encoder_dir, tmp_path, capsys):
    code = main(["--corpus", toy_corpus, "--model", encoder_dir,
                 "--kind", "triple", "--output", str(tmp_path / "o")])
    assert code == 1
    assert "usage error" in capsys.readouterr().err


def test_missing_corpus_file_is_a_data_error(encoder_dir, tmp_path, capsys):
    code = main(["--corpus", str(tmp_path / "absent.jsonl"),
                 "--model", encoder_dir, "--kind", "single",
                 "--output", str(tmp_path / "o")])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_unloadable_model_is_a_data_error(toy_corpus, tmp_path, capsys):
    code = main(["--corpus", toy_corpus, "--model", str(tmp_path / "ghost"),
                 "--kind", "single", "--output", str(tmp_path / "o")])
    assert code == 2
    assert "cannot load encoder" in capsys.readouterr().err


def test_substitution_count_reported_on_stderr(toy_corpus, toy_docs, encoder_dir,
                                               tmp_path, capsys, monkeypatch):
    poison = toy_docs[0]["sentences"][0]
    real = jobs_mod._encode_text

    def flaky(tokenizer, text, text_pair, limit):
        if text == poison:
            raise ValueError("broken input")
        return real(tokenizer, text, text_pair, limit)

    monkeypatch.setattr(jobs_mod, "_encode_text", flaky)
    code = main(["--corpus", toy_corpus, "--model", encoder_dir,
                 "--kind", "single", "--output", str(tmp_path / "o.t2emb")])
    captured = capsys.readouterr()
    assert code == 0
    assert "1 rows were substituted" in captured.err