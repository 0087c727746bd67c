import os
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dchsbm.cli import main
from dchsbm.io import (
    confusion_to_text,
    embedding_from_csv,
    embedding_to_csv,
    hypergraph_from_text,
    hypergraph_to_text,
    labels_from_csv,
    labels_to_csv,
    matrix_from_text,
    matrix_to_text,
    read_hypergraph,
    write_hypergraph,
)
from dchsbm.model import Hypergraph, sample_scalable
from dchsbm.projection import weighted_adjacency
from dchsbm.spectral import leading_eigenpairs
from fixtures import random_params

CONFIG = """n = 80
K = 2
M = 3
density_scales = 8, 48
trials = 2
kmeans_restarts = 3
"""


# ---- text formats ------------------------------------------------------


def test_hypergraph_text_format():
    H = Hypergraph(8, [(0, 3, 3, 6), (1, 2)])
    text = hypergraph_to_text(H)
    assert text == "n 8 edges 2\n1 4 4 7\n2 3\n"
    assert hypergraph_from_text(text) == H


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 40), M=st.integers(2, 5))
def test_hypergraph_round_trip(seed, n, M):
    H = sample_scalable(random_params(seed, n, 1, M, target=0.3), seed)
    assert hypergraph_from_text(hypergraph_to_text(H)) == H
    assert hypergraph_to_text(hypergraph_from_text(hypergraph_to_text(H))) == hypergraph_to_text(H)


@pytest.mark.parametrize("text", ["", "nodes 3\n1 2\n", "n 3 edges 2\n1 2\n", "n 3 edges 1\n2 1\n",
                                  "n 3 edges 1\n1 4\n", "n 3 edges 1\n2\n"])
def test_hypergraph_bad_text(text):
    with pytest.raises(ValueError):
        hypergraph_from_text(text)


def test_matrix_dump_round_trip():
    H = Hypergraph(8, [(0, 3, 3, 6), (1, 2), (0, 1, 2)])
    exact = weighted_adjacency(H, exact=True)
    text = matrix_to_text(exact)
    assert text.splitlines()[0] == f"% symmetric n 8 nnz {exact.nnz}"
    assert "1 4 2/3" in text
    back = matrix_from_text(text)
    assert back.entries == exact.entries
    assert all(isinstance(w, Fraction) for w in back.entries.values())
    flt = weighted_adjacency(H)
    np.testing.assert_array_equal(matrix_from_text(matrix_to_text(flt)).to_dense(), flt.to_dense())


def test_labels_csv():
    labels = np.array([0, 1, 1, 2])
    text = labels_to_csv(labels)
    assert text.splitlines() == ["node,label", "1,1", "2,2", "3,2", "4,3"]
    assert labels_from_csv(text).tolist() == labels.tolist()
    with pytest.raises(ValueError):
        labels_from_csv("id,label\n1,1\n")
    with pytest.raises(ValueError):
        labels_from_csv("node,label\n1,1\n3,1\n")


def test_embedding_csv():
    A = weighted_adjacency(sample_scalable(random_params(1, 30, 2, 3), 0))
    emb = leading_eigenpairs(A, 2)
    text = embedding_to_csv(emb)
    assert text.splitlines()[0] == "node,lambda_rank_1,lambda_rank_2"
    assert text.splitlines()[1].startswith("eigenvalue,")
    vals, U = embedding_from_csv(text)
    assert np.array_equal(vals, emb.eigenvalues) and np.array_equal(U, emb.U)


def test_confusion_text():
    text = confusion_to_text(np.array([[3, 1], [0, 4]]))
    assert text.splitlines()[1].split() == ["1", "3", "1"]


# ---- CLI ---------------------------------------------------------------


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "config.txt"
    path.write_text(CONFIG)
    return str(path)


def test_cli_print_config(capsys, cfg_path):
    assert main(["print-config", "--config", cfg_path, "--seed", "9"]) == 0
    out = capsys.readouterr().out
    assert "n = 80" in out and "master_seed = 9" in out


def test_cli_experiment_outputs(tmp_path, cfg_path, capsys):
    out = tmp_path / "run"
    assert main(["experiment", "--config", cfg_path, "--out-dir", str(out)]) == 0
    for name in ("trials.csv", "summary.csv", "timings.csv", "config.txt"):
        assert (out / name).exists()
    first = (out / "trials.csv").read_bytes()
    out2 = tmp_path / "run2"
    assert main(["experiment", "--config", cfg_path, "--out-dir", str(out2), "--threads", "2"]) == 0
    assert (out2 / "trials.csv").read_bytes() == first
    assert (out2 / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()
    assert "failed trials" in capsys.readouterr().out


def test_cli_generate_cluster_diagnose(tmp_path, cfg_path, capsys):
    out = str(tmp_path)
    assert main(["generate", "--config", cfg_path, "--out-dir", out]) == 0
    hyper = os.path.join(out, "hypergraph.txt")
    H = read_hypergraph(hyper)
    assert H.n == 80 and len(H) > 0
    assert main(["cluster", hyper, "-K", "2", "--truth", os.path.join(out, "truth.csv"), "--out-dir", out,
                 "--dump-matrix"]) == 0
    text = capsys.readouterr().out
    assert "misclustered 0/80" in text
    for name in ("labels_kmeans.csv", "labels_threshold.csv", "embedding.csv", "adjacency.txt",
                 "confusion_kmeans.txt"):
        assert os.path.exists(os.path.join(out, name))
    with open(os.path.join(out, "labels_threshold.csv")) as fh:
        assert len(labels_from_csv(fh.read())) == 80
    assert main(["diagnose", "--config", cfg_path, "--scale", "8", "--c0", "2.5"]) == 0
    diag = capsys.readouterr().out
    assert "gamma = 1.0" in diag and "c0 = 2.5" in diag and "full_rank = True" in diag


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("frobnicate = 3\n")
    assert main(["print-config", "--config", str(bad)]) == 2
    assert main(["experiment", "--config", str(tmp_path / "missing.txt")]) == 2
    infeasible = tmp_path / "inf.txt"
    infeasible.write_text("n = 40\ndensity_scales = 100000\ntrials = 1\n")
    assert main(["experiment", "--config", str(infeasible), "--out-dir", str(tmp_path)]) == 2
    malformed = tmp_path / "h.txt"
    malformed.write_text("n 3 edges 5\n1 2\n")
    assert main(["cluster", str(malformed), "-K", "2", "--out-dir", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_numerical_failure(tmp_path, monkeypatch):
    import dchsbm.cli as cli
    from dchsbm.errors import NumericalError

    def boom(*args, **kwargs):
        raise NumericalError("no convergence")

    hyper = tmp_path / "h.txt"
    write_hypergraph(str(hyper), Hypergraph(4, [(0, 1), (2, 3)]))
    monkeypatch.setattr(cli, "leading_eigenpairs", boom)
    assert main(["cluster", str(hyper), "-K", "2", "--out-dir", str(tmp_path)]) == 3


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "dchsbm", "print-config"], capture_output=True, text=True)
    assert res.returncode == 0 and "master_seed = 2024" in res.stdout
