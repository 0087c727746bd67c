"""Text formats.  All node ids and labels on disk are 1-based."""
from __future__ import annotations

import csv
import io
from fractions import Fraction

import numpy as np

from .model import Hypergraph
from .projection import SparseSymMatrix


def hypergraph_to_text(H: Hypergraph) -> str:
    lines = [f"n {H.n} edges {len(H.edges)}"]
    lines.extend(" ".join(str(v + 1) for v in e) for e in H.edges)
    return "\n".join(lines) + "\n"


def hypergraph_from_text(text: str) -> Hypergraph:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty hypergraph file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "n" or head[2] != "edges":
        raise ValueError(f"bad header {lines[0]!r}; expected 'n <n> edges <count>'")
    n, count = int(head[1]), int(head[3])
    edges = []
    for ln in lines[1:]:
        nodes = [int(tok) - 1 for tok in ln.split()]
        if nodes != sorted(nodes):
            raise ValueError(f"edge {ln!r} is not sorted")
        edges.append(tuple(nodes))
    if len(edges) != count:
        raise ValueError(f"header announces {count} edges, found {len(edges)}")
    return Hypergraph(n, edges)


def write_hypergraph(path, H: Hypergraph) -> None:
    with open(path, "w") as fh:
        fh.write(hypergraph_to_text(H))


def read_hypergraph(path) -> Hypergraph:
    with open(path) as fh:
        return hypergraph_from_text(fh.read())


def _fmt_weight(w) -> str:
    if isinstance(w, Fraction):
        return f"{w.numerator}/{w.denominator}"
    return repr(float(w))


def matrix_to_text(A: SparseSymMatrix) -> str:
    entries = A.entries
    lines = [f"% symmetric n {A.n} nnz {len(entries)}"]
    lines.extend(f"{i + 1} {j + 1} {_fmt_weight(w)}" for (i, j), w in sorted(entries.items()))
    return "\n".join(lines) + "\n"


def matrix_from_text(text: str) -> SparseSymMatrix:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    head = lines[0].lstrip("%").split()
    if head[:2] != ["symmetric", "n"] or head[3] != "nnz":
        raise ValueError(f"bad header {lines[0]!r}")
    n, nnz = int(head[2]), int(head[4])
    entries = {}
    for ln in lines[1:]:
        i, j, w = ln.split()
        entries[(int(i) - 1, int(j) - 1)] = Fraction(w) if "/" in w else float(w)
    if len(entries) != nnz:
        raise ValueError(f"header announces {nnz} entries, found {len(entries)}")
    return SparseSymMatrix(n, entries)


def labels_to_csv(labels) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", "label"])
    for i, lab in enumerate(np.asarray(labels).tolist()):
        w.writerow([i + 1, int(lab) + 1])
    return buf.getvalue()


def labels_from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["node", "label"]:
        raise ValueError("labels CSV must start with a 'node,label' header")
    pairs = sorted((int(a), int(b)) for a, b in rows[1:] if a.strip())
    if [a for a, _ in pairs] != list(range(1, len(pairs) + 1)):
        raise ValueError("labels CSV must list nodes 1..n exactly once")
    return np.array([b - 1 for _, b in pairs], dtype=np.int64)


def embedding_to_csv(emb) -> str:
    """Header row ``node,lambda_rank_1..K``, then an ``eigenvalue`` row, then one row per node."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    K = emb.U.shape[1]
    w.writerow(["node"] + [f"lambda_rank_{k + 1}" for k in range(K)])
    w.writerow(["eigenvalue"] + [repr(float(v)) for v in emb.eigenvalues])
    for i, row in enumerate(emb.U.tolist()):
        w.writerow([i + 1] + [repr(float(v)) for v in row])
    return buf.getvalue()


def embedding_from_csv(text: str):
    """(eigenvalues, U) from :func:`embedding_to_csv` output."""
    rows = list(csv.reader(io.StringIO(text)))
    values = np.array([float(v) for v in rows[1][1:]])
    U = np.array([[float(v) for v in r[1:]] for r in rows[2:]])
    return values, U.reshape(len(rows) - 2, len(values))


def confusion_to_text(C: np.ndarray) -> str:
    """Rows: true label, columns: estimated label (both 1-based)."""
    K = C.shape[0]
    lines = ["true\\est " + " ".join(f"{k + 1:>6d}" for k in range(K))]
    for r in range(K):
        lines.append(f"{r + 1:>9d} " + " ".join(f"{int(c):>6d}" for c in C[r]))
    return "\n".join(lines) + "\n"
