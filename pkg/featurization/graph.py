from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from featurization.tables import ALPHABET_INDEX, DescriptorTable, descriptor_table
from numeric.functional import gelu
from numeric.tensor import Tensor


@dataclass
class ResidueGraph:
    """Residue-level similarity graph: binary symmetric adjacency without self-loops."""

    node_feats: np.ndarray
    adjacency: np.ndarray

    def normalized_adjacency(self) -> np.ndarray:
        return normalize_adjacency(self.adjacency)


def residue_similarity(seq: str, table: DescriptorTable | None = None) -> np.ndarray:
    """Pairwise cosine similarity of z-scored descriptor vectors; unknown residues score 0."""
    table = table or descriptor_table()
    vecs = np.zeros((len(seq), table.zscored.shape[1]), dtype=np.float64)
    for i, aa in enumerate(seq.upper()):
        idx = ALPHABET_INDEX.get(aa)
        if idx is not None:
            vecs[i] = table.zscored[idx]
    norms = np.linalg.norm(vecs, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = vecs / safe[:, None]
    return unit @ unit.T


def build_residue_graph(
    seq: str,
    node_feats: np.ndarray,
    threshold: float,
    table: DescriptorTable | None = None,
) -> ResidueGraph:
    if not seq:
        raise ValueError("cannot build a residue graph for an empty sequence")
    if node_feats.shape[0] != len(seq):
        raise ValueError(
            f"node features have {node_feats.shape[0]} rows for a sequence of length {len(seq)}"
        )
    sim = residue_similarity(seq, table)
    adjacency = (sim > threshold).astype(np.float64)
    np.fill_diagonal(adjacency, 0.0)
    # cosine is symmetric up to rounding; take the upper triangle as canonical
    upper = np.triu(adjacency, k=1)
    adjacency = upper + upper.T
    return ResidueGraph(node_feats=node_feats, adjacency=adjacency)


def normalize_adjacency(adjacency: np.ndarray) -> np.ndarray:
    """D̂^{-1/2} (A + I) D̂^{-1/2}; works on a single L×L matrix or a B×L×L stack."""
    a_hat = adjacency + np.eye(adjacency.shape[-1], dtype=adjacency.dtype)
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=-1))
    return a_hat * inv_sqrt[..., :, None] * inv_sqrt[..., None, :]


def gcn_propagate(
    norm_adj: np.ndarray,
    x: Tensor,
    weights: Sequence[Tensor],
    activation: str = "gelu",
) -> Tensor:
    """Apply ``H <- act(Â_norm H W)`` once per weight matrix."""
    if activation not in ("gelu", "linear"):
        raise ValueError(f"unsupported GCN activation {activation!r}")
    adj = Tensor(norm_adj, dtype=x.dtype)
    h = x
    for w in weights:
        if h.shape[-1] != w.shape[0]:
            raise ValueError(f"GCN weight {w.shape} does not match features {h.shape}")
        h = adj @ (h @ w)
        if activation == "gelu":
            h = gelu(h)
    return h


def gcn_forward(
    graph: ResidueGraph,
    weights: Sequence[Tensor],
    activation: str = "gelu",
) -> Tensor:
    x = Tensor(graph.node_feats, dtype=weights[0].dtype if weights else np.float64)
    return gcn_propagate(graph.normalized_adjacency(), x, weights, activation)
