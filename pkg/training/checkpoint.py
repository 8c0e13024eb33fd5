"""Checkpoint container.

Layout: magic ``CAMCKPT1``, u64 little-endian manifest length, a JSON manifest
with sorted keys, then the CAMT blobs of every stored array back to back. Each
manifest entry names its blob's offset, length and SHA-256.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import pathlib
import struct
from dataclasses import dataclass, field

import numpy as np

from backbone.model import CameModel
from config import TrainConfig
from errors import CheckpointError, TensorFileError
from featurization.camt import decode_tensor, encode_tensor
from numeric.optim import AdamState
from numeric.rng import RngStream
from training.swa import SwaState

log = logging.getLogger(__name__)

MAGIC = b"CAMCKPT1"
_LENGTH = struct.Struct("<Q")


@dataclass
class Checkpoint:
    config: TrainConfig
    widths: dict[str, int]
    n_classes: int
    epoch: int
    params: dict[str, np.ndarray]
    adam: AdamState
    swa: SwaState | None = None
    rng_state: dict | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def capture(
        cls,
        model: CameModel,
        adam: AdamState,
        epoch: int,
        swa: SwaState | None = None,
        rng: RngStream | None = None,
        extra: dict | None = None,
    ) -> Checkpoint:
        return cls(
            config=model.cfg,
            widths=dict(model.widths),
            n_classes=model.n_classes,
            epoch=epoch,
            params={name: p.data.copy() for name, p in model.parameters().items()},
            adam=AdamState(
                lr=adam.lr,
                beta1=adam.beta1,
                beta2=adam.beta2,
                eps=adam.eps,
                weight_decay=adam.weight_decay,
                t=adam.t,
                m={k: v.copy() for k, v in adam.m.items()},
                v={k: v.copy() for k, v in adam.v.items()},
            ),
            swa=swa,
            rng_state=rng.state() if rng is not None else None,
            extra=dict(extra or {}),
        )

    def to_model(self, use_swa: bool = False) -> CameModel:
        """Rebuild the model; ``use_swa`` loads the averaged weights when any were absorbed."""
        model = CameModel.init(self.config, self.widths, self.n_classes, RngStream(self.config.seed))
        params = model.parameters()
        if set(params) != set(self.params):
            missing = sorted(set(params) ^ set(self.params))
            raise CheckpointError(f"checkpoint parameters do not match the model: {', '.join(missing[:5])}")
        source = self.params
        if use_swa and self.swa is not None and self.swa.active:
            source = self.swa.mean
        for name, p in params.items():
            array = source[name]
            if array.shape != p.shape:
                raise CheckpointError(f"{name}: stored shape {array.shape} does not match {p.shape}")
            p.data = array.astype(p.dtype, copy=True)
        return model


def _arrays(ckpt: Checkpoint) -> dict[str, np.ndarray]:
    arrays = {f"param/{k}": v for k, v in ckpt.params.items()}
    arrays.update({f"adam.m/{k}": v for k, v in ckpt.adam.m.items()})
    arrays.update({f"adam.v/{k}": v for k, v in ckpt.adam.v.items()})
    if ckpt.swa is not None:
        arrays.update({f"swa/{k}": v for k, v in ckpt.swa.mean.items()})
    return arrays


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    arrays = _arrays(ckpt)
    entries = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        blob = encode_tensor(arrays[name])
        entries.append(
            {"name": name, "offset": offset, "length": len(blob), "sha256": hashlib.sha256(blob).hexdigest()}
        )
        blobs.append(blob)
        offset += len(blob)

    adam = ckpt.adam
    manifest = {
        "config": ckpt.config.to_dict(),
        "widths": ckpt.widths,
        "n_classes": ckpt.n_classes,
        "epoch": ckpt.epoch,
        "adam": {
            "lr": adam.lr,
            "beta1": adam.beta1,
            "beta2": adam.beta2,
            "eps": adam.eps,
            "weight_decay": adam.weight_decay,
            "t": adam.t,
        },
        "swa": None if ckpt.swa is None else {"start": ckpt.swa.start, "count": ckpt.swa.count},
        "rng": ckpt.rng_state,
        "extra": ckpt.extra,
        "entries": entries,
    }
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + _LENGTH.pack(len(header)) + header + b"".join(blobs)


def decode_checkpoint(blob: bytes, source: str = "<bytes>") -> Checkpoint:
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint (bad magic)")
    start = len(MAGIC) + _LENGTH.size
    if len(blob) < start:
        raise CheckpointError(f"{source}: truncated header")
    (length,) = _LENGTH.unpack_from(blob, len(MAGIC))
    try:
        manifest = json.loads(blob[start : start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{source}: unreadable manifest: {exc}") from exc

    body = blob[start + length :]
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest["entries"]:
        chunk = body[entry["offset"] : entry["offset"] + entry["length"]]
        if hashlib.sha256(chunk).hexdigest() != entry["sha256"]:
            raise CheckpointError(f"{source}: checksum mismatch for {entry['name']}")
        try:
            arrays[entry["name"]] = decode_tensor(chunk, f"{source}:{entry['name']}")
        except TensorFileError as exc:
            raise CheckpointError(str(exc)) from exc

    def group(prefix: str) -> dict[str, np.ndarray]:
        return {k[len(prefix) :]: v for k, v in arrays.items() if k.startswith(prefix)}

    adam = AdamState(**manifest["adam"], m=group("adam.m/"), v=group("adam.v/"))
    swa = None
    if manifest["swa"] is not None:
        swa = SwaState(start=manifest["swa"]["start"], count=manifest["swa"]["count"], mean=group("swa/"))
    return Checkpoint(
        config=TrainConfig.from_dict(manifest["config"]),
        widths=manifest["widths"],
        n_classes=manifest["n_classes"],
        epoch=manifest["epoch"],
        params=group("param/"),
        adam=adam,
        swa=swa,
        rng_state=manifest["rng"],
        extra=manifest["extra"],
    )


def save_checkpoint(path: str | os.PathLike, ckpt: Checkpoint) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(ckpt))
    log.info("Checkpoint for epoch %d written to %s", ckpt.epoch, path)


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    try:
        blob = pathlib.Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc
    return decode_checkpoint(blob, str(path))
