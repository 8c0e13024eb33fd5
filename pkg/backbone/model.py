"""The full network: projection, adaptive fusion, transformer, MoE and heads."""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from backbone.fusion import AmfParams, AmfWeights, amf_fuse, amf_weights, mean_pool, uniform_weights
from backbone.moe import MoeParams, expert_diversity_loss, moe_forward
from backbone.transformer import TransformerParams, transformer_encode
from config import MODALITIES, TrainConfig
from errors import DataError
from featurization.bundle import Batch
from featurization.graph import gcn_propagate
from featurization.projection import ProjectionParams, project_modality
from numeric.params import glorot, parameter_dict
from numeric.rng import RngStream
from numeric.tensor import Tensor, concatenate
from objectives.heads import AuxHead, ClassifierHead, ProjectionHead, classify_logits, contrastive_project, predict
from objectives.losses import (
    LossBreakdown,
    LossWeights,
    aux_modality_loss,
    focal_loss,
    supcon_loss,
    total_loss,
)

log = logging.getLogger(__name__)


@dataclass
class ModelParams:
    projections: dict[str, ProjectionParams]
    gcn: list[Tensor]
    amf: AmfParams | None
    transformer: TransformerParams
    moe: MoeParams
    classifier: ClassifierHead
    projection_head: ProjectionHead | None
    aux_heads: dict[str, AuxHead] = field(default_factory=dict)


@dataclass
class ForwardOutput:
    logits: Tensor  # (B, C)
    embeddings: Tensor | None  # (B, d') unit rows
    augmented: Tensor | None  # second view under feature augmentation
    z: Tensor  # pooled transformer output (B, d)
    h_moe: Tensor  # (B, d)
    gates: Tensor  # (B, K)
    expert_outputs: Tensor  # (B, K, d)
    fusion_weights: Tensor  # (B, M)
    amf: AmfWeights | None
    projected: list[Tensor | None]
    presence: np.ndarray  # (B, M) modalities that took part in fusion

    @property
    def probabilities(self) -> np.ndarray:
        shifted = self.logits.data - self.logits.data.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=-1, keepdims=True)

    @property
    def predictions(self) -> np.ndarray:
        return predict(self.logits.data)


class CameModel:
    """Parameters plus the forward pass for one configuration and feature layout."""

    def __init__(
        self,
        cfg: TrainConfig,
        params: ModelParams,
        widths: Mapping[str, int],
        n_classes: int,
    ) -> None:
        self.cfg = cfg
        self.params = params
        self.widths = dict(widths)
        self.n_classes = n_classes

    @classmethod
    def init(
        cls,
        cfg: TrainConfig,
        widths: Mapping[str, int],
        n_classes: int,
        rng: RngStream,
    ) -> CameModel:
        dtype = np.dtype(cfg.dtype)
        d = cfg.d_model
        active = [m for m in cfg.active_modalities if m in widths]

        projections = {}
        for m in active:
            d_in = cfg.gcn_dim if m == "gcn" else widths[m]
            projections[m] = ProjectionParams.init(rng.fork(f"proj.{m}"), d_in, d, dtype)
        gcn = []
        if "gcn" in active:
            gcn_rng = rng.fork("gcn")
            gcn = [glorot(gcn_rng, widths["gcn"], cfg.gcn_dim, dtype), glorot(gcn_rng, cfg.gcn_dim, cfg.gcn_dim, dtype)]

        amf = None
        if cfg.is_enabled("amf"):
            amf = AmfParams.init(rng.fork("amf"), len(MODALITIES), d, n_classes, dtype)
        transformer = TransformerParams.init(
            rng.fork("transformer"),
            d,
            cfg.n_layers,
            cfg.n_heads,
            ffn_mult=cfg.ffn_mult,
            dropout=cfg.dropout,
            ln_eps=cfg.ln_eps,
            max_len=cfg.max_len if cfg.use_positional else None,
            dtype=dtype,
        )
        n_experts = cfg.n_experts if cfg.is_enabled("moe") else 1
        moe = MoeParams.init(rng.fork("moe"), d, n_experts, cfg.expert_hidden, dtype)
        classifier = ClassifierHead.init(rng.fork("classifier"), d, cfg.classifier_hidden, n_classes, dtype)
        projection_head = None
        if cfg.is_enabled("contrastive"):
            projection_head = ProjectionHead.init(
                rng.fork("projection_head"), d, cfg.contrast_hidden, cfg.contrast_dim, dtype
            )
        aux_rng = rng.fork("aux")
        aux_heads = {m: AuxHead.init(aux_rng, d, n_classes, dtype) for m in active}

        params = ModelParams(projections, gcn, amf, transformer, moe, classifier, projection_head, aux_heads)
        return cls(cfg, params, widths, n_classes)

    def parameters(self) -> dict[str, Tensor]:
        return parameter_dict(self.params)

    # ── Forward ─────────────────────────────────────────────────────

    def _project(self, batch: Batch, rng: RngStream | None, training: bool) -> list[Tensor | None]:
        dtype = np.dtype(self.cfg.dtype)
        projected: list[Tensor | None] = []
        for slot, m in enumerate(MODALITIES):
            proj = self.params.projections.get(m)
            if proj is None or m not in batch.features or not batch.presence[:, slot].any():
                projected.append(None)
                continue
            x = Tensor(batch.features[m], dtype=dtype)
            if m == "gcn":
                x = gcn_propagate(batch.norm_adj, x, self.params.gcn)
            projected.append(
                project_modality(x, proj, rng, training, p=self.cfg.dropout, eps=self.cfg.ln_eps)
            )
        return projected

    def _fusion_weights(
        self,
        projected: list[Tensor | None],
        presence: np.ndarray,
        labels: np.ndarray | None,
        pad_mask: np.ndarray,
    ) -> tuple[Tensor, AmfWeights | None]:
        if self.params.amf is None:
            return uniform_weights(presence, dtype=np.dtype(self.cfg.dtype)), None
        amf = amf_weights(
            projected,
            labels,
            self.params.amf,
            pad_mask=pad_mask,
            presence=presence,
            normalize=self.cfg.amf_normalize,
        )
        return amf.weights, amf

    def _head_pass(
        self,
        projected: list[Tensor | None],
        weights: Tensor,
        presence: np.ndarray,
        batch: Batch,
        rng: RngStream | None,
        training: bool,
    ):
        dtype = np.dtype(self.cfg.dtype)
        if presence.any():
            fused = amf_fuse(projected, weights, presence)
        else:
            length = batch.pad_mask.shape[1]
            fused = Tensor(np.zeros((len(batch), length, self.cfg.d_model), dtype=dtype))
        encoded = transformer_encode(fused, batch.pad_mask, self.params.transformer, rng, training)
        z = mean_pool(encoded, batch.pad_mask)
        moe = moe_forward(z, self.params.moe, single_expert=not self.cfg.is_enabled("moe"))
        logits = classify_logits(moe.h_moe, self.params.classifier, eps=self.cfg.ln_eps)
        return z, moe, logits

    def forward(
        self,
        batch: Batch,
        training: bool = False,
        rng: RngStream | None = None,
        labels: np.ndarray | None = None,
    ) -> ForwardOutput:
        """Run the network on a collated batch.

        ``labels`` condition the AMF class table and are only used in training.
        At inference gamma is the class-mean row, or with ``gamma_inference =
        "two_pass"`` the row of the class predicted by a first mean-gamma pass.
        """
        cfg = self.cfg
        projected = self._project(batch, rng, training)
        available = np.array([p is not None for p in projected], dtype=bool)
        presence = np.asarray(batch.presence, dtype=bool) & available[None, :]

        if not presence.any():
            log.warning("every modality is removed or absent; the fused representation is zero")
        elif not presence.any(axis=1).all():
            missing = [batch.ids[i] for i in np.flatnonzero(~presence.any(axis=1))]
            raise DataError(f"no active modality present for sample(s): {', '.join(missing[:5])}")

        gamma_labels = labels if training else None
        if presence.any():
            weights, amf = self._fusion_weights(projected, presence, gamma_labels, batch.pad_mask)
        else:
            weights, amf = Tensor(np.zeros(presence.shape, dtype=np.dtype(cfg.dtype))), None
        z, moe, logits = self._head_pass(projected, weights, presence, batch, rng, training)

        if not training and amf is not None and cfg.gamma_inference == "two_pass":
            first_guess = predict(logits.data)
            weights, amf = self._fusion_weights(projected, presence, first_guess, batch.pad_mask)
            z, moe, logits = self._head_pass(projected, weights, presence, batch, rng, training)

        embeddings = augmented = None
        if self.params.projection_head is not None:
            embeddings = contrastive_project(moe.h_moe, self.params.projection_head)
            if training and cfg.feature_augmentation:
                if rng is None:
                    raise ValueError("feature augmentation needs an RngStream")
                noise = rng.normal(moe.h_moe.shape, scale=cfg.augmentation_sigma, dtype=moe.h_moe.dtype)
                augmented = contrastive_project(moe.h_moe + Tensor(noise), self.params.projection_head)

        return ForwardOutput(
            logits=logits,
            embeddings=embeddings,
            augmented=augmented,
            z=z,
            h_moe=moe.h_moe,
            gates=moe.gates,
            expert_outputs=moe.expert_outputs,
            fusion_weights=weights,
            amf=amf,
            projected=projected,
            presence=presence,
        )

    # ── Loss ────────────────────────────────────────────────────────

    def loss(
        self,
        out: ForwardOutput,
        batch: Batch,
        alpha=None,
        epoch: int | None = None,
    ) -> LossBreakdown:
        """All four components for one batch, combined into ``breakdown.total``."""
        cfg = self.cfg
        labels = batch.labels
        dtype = out.logits.dtype
        zero = Tensor(np.zeros((), dtype=dtype))

        focal = focal_loss(out.logits, labels, alpha=alpha, gamma=cfg.focal_gamma)

        aux_heads = [self.params.aux_heads.get(m) for m in MODALITIES]
        modal = aux_modality_loss(out.projected, labels, aux_heads, batch.pad_mask, out.presence)

        contrast = zero
        if out.embeddings is not None:
            z, z_labels = out.embeddings, labels
            if out.augmented is not None:
                z = concatenate([out.embeddings, out.augmented], axis=0)
                z_labels = np.concatenate([labels, labels])
            if z.shape[0] >= 2:
                contrast = supcon_loss(z, z_labels, cfg.temperature, cfg.hard_negative_mining)

        diversity = zero
        if cfg.is_enabled("moe"):
            diversity = expert_diversity_loss(out.expert_outputs, cfg.diversity_mode)

        breakdown = LossBreakdown(focal=focal, modal=modal, contrast=contrast, diversity=diversity)
        total_loss(breakdown, LossWeights.from_config(cfg), epoch)
        return breakdown
