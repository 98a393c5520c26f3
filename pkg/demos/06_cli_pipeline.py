"""The command-line pipeline end to end: synth -> train -> eval ->
predict -> ablate, all through the same entry point the installed
`topseg` script uses."""

import json
import os
import tempfile

from topseg.cli import main

with tempfile.TemporaryDirectory() as tmp:
    data = os.path.join(tmp, "data")
    run = os.path.join(tmp, "run")
    grid = os.path.join(tmp, "grid")
    config = os.path.join(tmp, "model.json")

    # A deliberately tiny encoder keeps every stage under a second or two.
    with open(config, "w") as fh:
        json.dump({"d_model": 16, "n_layers": 1, "n_heads": 4,
                   "d_ffn": 32, "max_len": 20}, fh)

    assert main(["synth", "--output", data, "--docs", "24",
                 "--sentences", "10", "--topics", "3",
                 "--mean-segment-len", "3", "--dim", "8"]) == 0

    corpus = os.path.join(data, "corpus.jsonl")
    stores = ["--single-embeddings", os.path.join(data, "single.t2emb"),
              "--pairwise-embeddings", os.path.join(data, "pairwise.t2emb")]

    assert main(["train", "--corpus", corpus, "--output", run,
                 "--config", config, "--epochs", "2"] + stores) == 0

    checkpoint = os.path.join(run, "checkpoint.t2ckpt")
    report_path = os.path.join(tmp, "report.json")
    assert main(["eval", "--corpus", corpus, "--checkpoint", checkpoint,
                 "--output", report_path] + stores) == 0
    report = json.load(open(report_path))
    print("eval keys:", sorted(report))

    csv = os.path.join(tmp, "doc.csv")
    svg = os.path.join(tmp, "doc.svg")
    assert main(["predict", "--corpus", corpus, "--checkpoint", checkpoint,
                 "--doc-id", "synth0000", "--csv", csv,
                 "--plot", svg] + stores) == 0
    print("csv head:", open(csv).readline().strip())
    print("svg bytes:", os.path.getsize(svg))

    assert main(["ablate", "--corpus", corpus, "--output", grid,
                 "--config", config, "--epochs", "2"] + stores) == 0
    rows = json.load(open(os.path.join(grid, "ablation.json")))
    for row in rows:
        print(f"{row['variant']:20s} test Pk {row['test_pk']:.3f}")
