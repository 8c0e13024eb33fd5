from __future__ import annotations

import hashlib

import numpy as np


def _tag_key(tag: str) -> int:
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")


class RngStream:
    """Seeded counter-based random stream (Philox).

    The same seed yields the same sequence on every platform numpy supports,
    and the full generator state can be captured and restored for checkpoints.
    """

    def __init__(self, seed: int, *, _key: tuple[int, ...] | None = None) -> None:
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        entropy = (self.seed, *(_key or ()))
        self._bitgen = np.random.Philox(np.random.SeedSequence(entropy))
        self.generator = np.random.Generator(self._bitgen)
        self._key = tuple(_key or ())

    def fork(self, tag: str) -> RngStream:
        """Derive an independent child stream.

        The child depends on the tag and on this stream's position, so repeated
        forks with one tag differ while the whole sequence stays reproducible.
        """
        draw = int(self.generator.integers(0, 2**63))
        return RngStream(self.seed, _key=(*self._key, _tag_key(tag), draw))

    # ── Sampling ────────────────────────────────────────────────────

    def normal(self, shape, scale: float = 1.0, dtype=np.float64) -> np.ndarray:
        return (self.generator.standard_normal(shape) * scale).astype(dtype, copy=False)

    def uniform(self, shape, low: float = 0.0, high: float = 1.0, dtype=np.float64) -> np.ndarray:
        return self.generator.uniform(low, high, size=shape).astype(dtype, copy=False)

    def bernoulli(self, p_keep: float, shape) -> np.ndarray:
        return self.generator.random(shape) < p_keep

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, n: int, size: int, replace: bool = True) -> np.ndarray:
        return self.generator.choice(n, size=size, replace=replace)

    # ── State ───────────────────────────────────────────────────────

    def state(self) -> dict:
        state = self._bitgen.state
        inner = state["state"]
        return {
            "seed": self.seed,
            "key": list(self._key),
            "counter": [int(x) for x in inner["counter"]],
            "philox_key": [int(x) for x in inner["key"]],
            "buffer": [int(x) for x in state["buffer"]],
            "buffer_pos": int(state["buffer_pos"]),
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }

    def set_state(self, saved: dict) -> None:
        self._bitgen.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.array(saved["counter"], dtype=np.uint64),
                "key": np.array(saved["philox_key"], dtype=np.uint64),
            },
            "buffer": np.array(saved["buffer"], dtype=np.uint64),
            "buffer_pos": saved["buffer_pos"],
            "has_uint32": saved["has_uint32"],
            "uinteger": saved["uinteger"],
        }

    @classmethod
    def from_state(cls, saved: dict) -> RngStream:
        stream = cls(saved["seed"], _key=tuple(saved["key"]))
        stream.set_state(saved)
        return stream
