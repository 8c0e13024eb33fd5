from featurization.bundle import Batch, ModalityBundle, build_bundle, build_bundles, collate
from featurization.camt import read_tensor_file, write_tensor_file
from featurization.encoders import encode_blosum, encode_one_hot
from featurization.graph import ResidueGraph, build_residue_graph, gcn_forward
from featurization.projection import ProjectionParams, project_modality

__all__ = [
    "Batch",
    "ModalityBundle",
    "ProjectionParams",
    "ResidueGraph",
    "build_bundle",
    "build_bundles",
    "build_residue_graph",
    "collate",
    "encode_blosum",
    "encode_one_hot",
    "gcn_forward",
    "project_modality",
    "read_tensor_file",
    "write_tensor_file",
]
