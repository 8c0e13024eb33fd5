"""Residue alphabet, BLOSUM62 scores and the physicochemical descriptor table."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
ALPHABET_INDEX = {aa: i for i, aa in enumerate(ALPHABET)}

# BLOSUM62 as published, in the conventional ARND... row/column order.
_BLOSUM_ORDER = "ARNDCQEGHILKMFPSTWYV"
_BLOSUM_ROWS = """
 4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0
-1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3
-2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3
-2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3
 0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1
-1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2
-1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2
 0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3
-2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3
-1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3
-1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1
-1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2
-1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1
-2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1
-1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2
 1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2
 0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0
-3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3
-2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1
 0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4
"""


def _load_blosum62() -> np.ndarray:
    raw = np.array([row.split() for row in _BLOSUM_ROWS.strip().splitlines()], dtype=np.int64)
    order = [_BLOSUM_ORDER.index(aa) for aa in ALPHABET]
    return raw[np.ix_(order, order)]


BLOSUM62 = _load_blosum62()
BLOSUM62.setflags(write=False)

# Per-residue descriptors: Kyte-Doolittle hydropathy, net charge at pH 7,
# polarity flag, molecular weight (Da), isoelectric point.
_DESCRIPTOR_NAMES = ("hydropathy", "charge", "polarity", "molecular_weight", "isoelectric_point")
_DESCRIPTOR_VALUES = {
    "A": (1.8, 0.0, 0.0, 89.09, 6.00),
    "C": (2.5, 0.0, 0.0, 121.16, 5.07),
    "D": (-3.5, -1.0, 1.0, 133.10, 2.77),
    "E": (-3.5, -1.0, 1.0, 147.13, 3.22),
    "F": (2.8, 0.0, 0.0, 165.19, 5.48),
    "G": (-0.4, 0.0, 0.0, 75.07, 5.97),
    "H": (-3.2, 0.1, 1.0, 155.16, 7.59),
    "I": (4.5, 0.0, 0.0, 131.17, 6.02),
    "K": (-3.9, 1.0, 1.0, 146.19, 9.74),
    "L": (3.8, 0.0, 0.0, 131.17, 5.98),
    "M": (1.9, 0.0, 0.0, 149.21, 5.74),
    "N": (-3.5, 0.0, 1.0, 132.12, 5.41),
    "P": (-1.6, 0.0, 0.0, 115.13, 6.30),
    "Q": (-3.5, 0.0, 1.0, 146.15, 5.65),
    "R": (-4.5, 1.0, 1.0, 174.20, 10.76),
    "S": (-0.8, 0.0, 1.0, 105.09, 5.68),
    "T": (-0.7, 0.0, 1.0, 119.12, 5.60),
    "V": (4.2, 0.0, 0.0, 117.15, 5.96),
    "W": (-0.9, 0.0, 0.0, 204.23, 5.89),
    "Y": (-1.3, 0.0, 1.0, 181.19, 5.66),
}


@dataclass(frozen=True)
class DescriptorTable:
    names: tuple[str, ...]
    raw: np.ndarray
    zscored: np.ndarray

    def vector(self, residue: str) -> np.ndarray | None:
        idx = ALPHABET_INDEX.get(residue)
        return None if idx is None else self.zscored[idx]


def descriptor_table(names: Sequence[str] | None = None) -> DescriptorTable:
    """Descriptor table restricted to ``names``, z-scored over the 20 residues (population std)."""
    names = tuple(names or _DESCRIPTOR_NAMES)
    unknown = [n for n in names if n not in _DESCRIPTOR_NAMES]
    if unknown:
        raise ValueError(f"unknown descriptor(s): {', '.join(unknown)}")
    cols = [_DESCRIPTOR_NAMES.index(n) for n in names]
    raw = np.array([_DESCRIPTOR_VALUES[aa] for aa in ALPHABET], dtype=np.float64)[:, cols]
    zscored = (raw - raw.mean(axis=0)) / raw.std(axis=0)
    raw.setflags(write=False)
    zscored.setflags(write=False)
    return DescriptorTable(names, raw, zscored)

