from __future__ import annotations

import numpy as np
import pytest

from dataset.manifest import SampleRecord
from errors import BadMagicError, DataError, TruncatedPayloadError, UnsupportedFormatError
from featurization.bundle import build_bundle, build_bundles, collate, modality_widths
from featurization.camt import decode_tensor, encode_tensor, read_tensor_file, write_tensor_file
from featurization.encoders import encode_blosum, encode_one_hot
from featurization.graph import build_residue_graph, gcn_forward, normalize_adjacency, residue_similarity
from featurization.projection import ProjectionParams, project_modality
from featurization.tables import ALPHABET, ALPHABET_INDEX, BLOSUM62, descriptor_table
from numeric.tensor import Tensor


def test_one_hot_follows_alphabet_order():
    out = encode_one_hot("ACD")
    assert out.shape == (3, 20)
    assert [int(np.argmax(row)) for row in out] == [0, 1, 2]
    np.testing.assert_array_equal(out.sum(axis=1), [1.0, 1.0, 1.0])


def test_one_hot_unknown_residue_is_zero_row():
    out = encode_one_hot("AXA")
    np.testing.assert_array_equal(out[1], np.zeros(20))
    np.testing.assert_array_equal(out[0], out[2])


def test_encoders_reject_empty_sequence():
    with pytest.raises(ValueError):
        encode_one_hot("")
    with pytest.raises(ValueError):
        encode_blosum("")


def test_blosum_rows():
    row = encode_blosum("A")[0]
    assert row[ALPHABET_INDEX["A"]] == 4
    assert row[ALPHABET_INDEX["W"]] == -3
    np.testing.assert_array_equal(BLOSUM62, BLOSUM62.T)


def test_descriptor_table_is_zscored():
    table = descriptor_table()
    np.testing.assert_allclose(table.zscored.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(table.zscored.std(axis=0), 1.0)
    with pytest.raises(ValueError):
        descriptor_table(["mass"])


def test_identical_residues_form_a_complete_graph():
    graph = build_residue_graph("AAA", np.zeros((3, 4)), threshold=0.5)
    np.testing.assert_array_equal(graph.adjacency, np.ones((3, 3)) - np.eye(3))


def test_threshold_one_gives_no_edges_for_distinct_residues():
    graph = build_residue_graph("ACDEF", np.zeros((5, 2)), threshold=1.0)
    assert graph.adjacency.sum() == 0


def test_similarity_matches_dot_product_oracle():
    table = descriptor_table()
    a, v = table.vector("A"), table.vector("V")
    expected = float(a @ v / (np.linalg.norm(a) * np.linalg.norm(v)))
    sim = residue_similarity("AV", table)
    assert sim[0, 1] == pytest.approx(expected)
    graph = build_residue_graph("AV", np.zeros((2, 1)), threshold=0.85)
    assert graph.adjacency[0, 1] == float(expected > 0.85)


def test_unknown_residue_is_isolated():
    graph = build_residue_graph("AXA", np.zeros((3, 1)), threshold=0.5)
    assert graph.adjacency[1].sum() == 0
    assert graph.adjacency[0, 2] == 1.0


def test_graph_rejects_row_mismatch():
    with pytest.raises(ValueError):
        build_residue_graph("AAA", np.zeros((2, 4)), threshold=0.5)


def test_normalized_adjacency_rows_without_edges():
    norm = normalize_adjacency(np.zeros((2, 2)))
    np.testing.assert_array_equal(norm, np.eye(2))


def test_gcn_linear_layer_on_two_connected_nodes():
    graph = build_residue_graph("AA", np.array([[2.0, 0.0], [0.0, 2.0]]), threshold=0.5)
    out = gcn_forward(graph, [Tensor(np.eye(2))], activation="linear")
    np.testing.assert_allclose(out.data, [[1.0, 1.0], [1.0, 1.0]])


def test_zero_projection_is_zero():
    params = ProjectionParams(
        weight=Tensor(np.zeros((4, 3))),
        bias=Tensor(np.zeros(3)),
        ln_gain=Tensor(np.ones(3)),
        ln_bias=Tensor(np.zeros(3)),
    )
    out = project_modality(Tensor(np.ones((5, 4))), params, None, training=False)
    np.testing.assert_array_equal(out.data, np.zeros((5, 3)))


def test_projection_rejects_width_mismatch(rng):
    params = ProjectionParams.init(rng, 4, 3)
    with pytest.raises(ValueError):
        project_modality(Tensor(np.ones((5, 6))), params, None, training=False)


def test_camt_round_trip_is_bit_identical(tmp_path, rng):
    matrix = rng.normal((3, 4))
    path = tmp_path / "m.camt"
    write_tensor_file(path, matrix)
    back = read_tensor_file(path).data
    assert back.dtype == np.float64
    assert back.tobytes() == matrix.tobytes()
    assert encode_tensor(back) == path.read_bytes()


def test_camt_float32_header():
    blob = encode_tensor(np.ones((2, 2), dtype=np.float32))
    assert blob[:4] == b"CAMT"
    assert blob[4:7] == bytes([1, 1, 2])
    assert len(blob) == 7 + 2 * 8 + 4 * 4


def test_camt_bad_magic():
    blob = b"XXXX" + encode_tensor(np.ones(2))[4:]
    with pytest.raises(BadMagicError):
        decode_tensor(blob)


def test_camt_truncated_payload():
    blob = encode_tensor(np.ones((2, 2)))
    with pytest.raises(TruncatedPayloadError):
        decode_tensor(blob[:-8])


@pytest.mark.parametrize("offset, value", [(5, 3), (6, 0), (6, 9)])
def test_camt_rejects_unknown_dtype_or_rank(offset, value):
    blob = bytearray(encode_tensor(np.ones(2)))
    blob[offset] = value
    with pytest.raises(UnsupportedFormatError):
        decode_tensor(bytes(blob))


def test_camt_rejects_integer_arrays():
    with pytest.raises(UnsupportedFormatError):
        encode_tensor(np.ones(3, dtype=np.int32))


def _record(tmp_path, seq="ACDEF", label=0, **features) -> SampleRecord:
    paths = {}
    for name, array in features.items():
        path = tmp_path / f"{name}.camt"
        write_tensor_file(path, array)
        paths[name] = path
    return SampleRecord(id="r0", sequence=seq, label=label, cluster=0, features=paths)


def test_bundle_without_files_falls_back_to_one_hot_nodes(tmp_path):
    bundle = build_bundle(_record(tmp_path), threshold=0.85)
    assert bundle.mask == (True, True, False, False, True)
    assert bundle.gcn_fallback
    np.testing.assert_array_equal(bundle.features["gcn"], bundle.features["onehot"])


def test_bundle_uses_esm_for_graph_nodes(tmp_path, rng):
    esm = rng.normal((5, 8))
    bundle = build_bundle(_record(tmp_path, esm=esm, struct=rng.normal((5, 3))), threshold=0.85)
    assert bundle.mask == (True, True, True, True, True)
    assert not bundle.gcn_fallback
    np.testing.assert_array_equal(bundle.features["gcn"], esm)


def test_bundle_rejects_row_count_mismatch(tmp_path, rng):
    with pytest.raises(DataError):
        build_bundle(_record(tmp_path, esm=rng.normal((4, 8))), threshold=0.85)


def test_collate_pads_and_tracks_presence(tmp_path, rng):
    long = build_bundle(_record(tmp_path, esm=rng.normal((5, 8))), threshold=0.85)
    short = build_bundle(_record(tmp_path, seq="AC", label=1), threshold=0.85)
    bundles = [long, short]
    widths = modality_widths([long])
    batch = collate(bundles, widths)
    assert batch.features["esm"].shape == (2, 5, 8)
    np.testing.assert_array_equal(batch.pad_mask.sum(axis=1), [5, 2])
    np.testing.assert_array_equal(batch.presence[:, 2], [True, False])
    np.testing.assert_array_equal(batch.features["onehot"][1, 2:], 0.0)
    np.testing.assert_array_equal(batch.labels, [0, 1])


def test_widths_must_agree(tmp_path, rng):
    a = build_bundle(_record(tmp_path, esm=rng.normal((5, 8))), threshold=0.85)
    b = build_bundle(_record(tmp_path, esm=rng.normal((5, 6))), threshold=0.85)
    with pytest.raises(DataError):
        modality_widths([a, b])


def test_jitter_changes_features_reproducibly(tmp_path):
    record = _record(tmp_path)
    record.jitter_sigma, record.jitter_seed = 0.1, 3
    first, second = build_bundles([record, record], threshold=0.85)
    plain = build_bundle(_record(tmp_path), threshold=0.85)
    np.testing.assert_array_equal(first.features["onehot"], second.features["onehot"])
    assert not np.array_equal(first.features["onehot"], plain.features["onehot"])


def test_alphabet_has_twenty_residues():
    assert len(ALPHABET) == len(set(ALPHABET)) == 20


def test_gcn_is_permutation_equivariant(rng):
    from featurization.graph import ResidueGraph

    x = rng.normal((6, 4))
    upper = np.triu(rng.bernoulli(0.5, (6, 6)).astype(np.float64), 1)
    adjacency = upper + upper.T
    weights = [Tensor(rng.normal((4, 5))), Tensor(rng.normal((5, 3)))]
    perm = rng.permutation(6)
    p = np.eye(6)[perm]

    out = gcn_forward(ResidueGraph(x, adjacency), weights).data
    permuted = gcn_forward(ResidueGraph(p @ x, p @ adjacency @ p.T), weights).data
    np.testing.assert_allclose(permuted, p @ out, atol=1e-10)
