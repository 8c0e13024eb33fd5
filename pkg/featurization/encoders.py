from __future__ import annotations

import numpy as np

from featurization.tables import ALPHABET, ALPHABET_INDEX, BLOSUM62


def _indices(seq: str) -> np.ndarray:
    if not seq:
        raise ValueError("cannot encode an empty sequence")
    return np.array([ALPHABET_INDEX.get(aa, -1) for aa in seq.upper()], dtype=np.int64)


def encode_one_hot(seq: str) -> np.ndarray:
    """L×20 identity encoding; residues outside the alphabet give a zero row."""
    idx = _indices(seq)
    out = np.zeros((len(idx), len(ALPHABET)), dtype=np.float64)
    known = idx >= 0
    out[np.flatnonzero(known), idx[known]] = 1.0
    return out


def encode_blosum(seq: str) -> np.ndarray:
    """L×20 BLOSUM62 score rows; residues outside the alphabet give a zero row."""
    idx = _indices(seq)
    out = np.zeros((len(idx), len(ALPHABET)), dtype=np.float64)
    known = idx >= 0
    out[known] = BLOSUM62[idx[known]]
    return out
