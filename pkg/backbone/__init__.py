from backbone.fusion import AmfParams, AmfWeights, amf_fuse, amf_weights, mean_pool, uniform_weights
from backbone.moe import MoeOutput, MoeParams, expert_diversity_loss, moe_forward
from backbone.transformer import TransformerParams, multi_head_attention, transformer_encode

__all__ = [
    "AmfParams",
    "AmfWeights",
    "MoeOutput",
    "MoeParams",
    "TransformerParams",
    "amf_fuse",
    "amf_weights",
    "expert_diversity_loss",
    "mean_pool",
    "moe_forward",
    "multi_head_attention",
    "transformer_encode",
    "uniform_weights",
]
