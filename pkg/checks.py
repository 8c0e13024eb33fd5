from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from errors import GradCheckFailure
from numeric import functional as F
from numeric import tensor
from numeric.rng import RngStream
from numeric.tensor import Tape, Tensor, forward_backward

log = logging.getLogger(__name__)


@dataclass
class CoordinateError:
    param: str
    index: tuple[int, ...]
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    name: str
    passed: bool
    checked: int
    worst: CoordinateError | None

    def raise_for_failure(self) -> None:
        if not self.passed:
            w = self.worst
            raise GradCheckFailure(
                f"{self.name}: gradient mismatch at {w.param}{list(w.index)}: "
                f"tape {w.analytic:.6e} vs central difference {w.numeric:.6e} "
                f"(relative error {w.rel_error:.2e})"
            )

    def summary(self) -> str:
        status = "ok" if self.passed else "FAIL"
        worst = f", worst rel err {self.worst.rel_error:.2e}" if self.worst else ""
        return f"[{status}] {self.name}: {self.checked} coordinates{worst}"


def grad_check(
    f: Callable[[], Tensor],
    params: Mapping[str, Tensor] | Sequence[Tensor],
    rtol: float = 1e-4,
    step: float = 1e-5,
    atol: float = 1e-6,
    max_coords: int | None = None,
    rng: RngStream | None = None,
    name: str = "grad_check",
) -> GradCheckReport:
    """Compare tape gradients of a scalar function against central differences.

    ``f`` must rebuild its output from the current parameter arrays on every
    call and be deterministic. The per-coordinate error is
    ``|a - n| / max(|a|, |n|, atol)``.
    """
    if not isinstance(params, Mapping):
        params = {p.name or f"param{i}": p for i, p in enumerate(params)}
    for pname, p in params.items():
        if p.dtype != np.float64:
            raise ValueError(f"grad_check needs float64 parameters, {pname!r} is {p.dtype}")
        p.requires_grad = True

    with Tape() as tape:
        out = f()
    grads = forward_backward(out, tape)

    worst: CoordinateError | None = None
    checked = 0
    for pname, p in params.items():
        analytic = grads.get(p, np.zeros_like(p.data))
        flat_ids = np.arange(p.data.size)
        if max_coords is not None and p.data.size > max_coords:
            picker = rng or RngStream(0)
            flat_ids = np.sort(picker.choice(p.data.size, max_coords, replace=False))

        original = p.data
        for flat in flat_ids:
            flat = int(flat)
            p.data = original.copy()
            p.data.flat[flat] += step
            f_plus = f().item()
            p.data = original.copy()
            p.data.flat[flat] -= step
            f_minus = f().item()
            p.data = original

            numeric = (f_plus - f_minus) / (2.0 * step)
            a = float(analytic.flat[flat])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), atol)
            checked += 1
            if worst is None or rel > worst.rel_error:
                index = tuple(int(i) for i in np.unravel_index(flat, p.shape))
                worst = CoordinateError(pname, index, a, numeric, rel)

    passed = worst is None or worst.rel_error <= rtol
    report = GradCheckReport(name, passed, checked, worst)
    log.debug(report.summary())
    return report


# ── Suite ───────────────────────────────────────────────────────────


def _weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    return (out * Tensor(weights)).sum()


def _primitive_cases(rng: RngStream) -> dict[str, tuple[Callable[[], Tensor], dict[str, Tensor]]]:
    """Each case maps a scalar function to the leaves it is checked against."""

    def leaf(name: str, shape, positive: bool = False) -> Tensor:
        data = rng.uniform(shape, 0.5, 2.0) if positive else rng.normal(shape)
        return Tensor(data, requires_grad=True, name=name)

    a, b = leaf("a", (3, 4)), leaf("b", (3, 4))
    pos = leaf("pos", (3, 4), positive=True)
    row = leaf("row", (4,))
    m1, m2 = leaf("m1", (2, 3, 4)), leaf("m2", (2, 4, 5))
    gain, bias = leaf("gain", (4,)), leaf("bias", (4,))
    w34 = rng.normal((3, 4))
    w35 = rng.normal((2, 3, 5))
    mask = rng.bernoulli(0.3, (3, 4))
    targets = rng.integers(0, 4, size=3)

    return {
        "add": (lambda: _weighted_sum(tensor.add(a, row), w34), {"a": a, "row": row}),
        "sub": (lambda: _weighted_sum(tensor.sub(a, b), w34), {"a": a, "b": b}),
        "mul": (lambda: _weighted_sum(tensor.mul(a, row), w34), {"a": a, "row": row}),
        "div": (lambda: _weighted_sum(tensor.div(a, pos), w34), {"a": a, "pos": pos}),
        "power": (lambda: _weighted_sum(tensor.power(pos, 2.5), w34), {"pos": pos}),
        "exp": (lambda: _weighted_sum(tensor.exp(a), w34), {"a": a}),
        "log": (lambda: _weighted_sum(tensor.log(pos), w34), {"pos": pos}),
        "sqrt": (lambda: _weighted_sum(tensor.sqrt(pos), w34), {"pos": pos}),
        "tanh": (lambda: _weighted_sum(tensor.tanh(a), w34), {"a": a}),
        "sigmoid": (lambda: _weighted_sum(tensor.sigmoid(a), w34), {"a": a}),
        "matmul": (lambda: _weighted_sum(tensor.matmul(m1, m2), w35), {"m1": m1, "m2": m2}),
        "sum": (lambda: (tensor.sum_(a, axis=1) ** 2).sum(), {"a": a}),
        "mean": (lambda: (tensor.mean(a, axis=0) ** 2).sum(), {"a": a}),
        "reshape_transpose": (
            lambda: _weighted_sum(tensor.transpose(a.reshape(4, 3)), w34),
            {"a": a},
        ),
        "getitem": (lambda: (a[np.array([0, 2, 0])] ** 2).sum(), {"a": a}),
        "stack": (lambda: _weighted_sum(tensor.stack([a, b], axis=1).sum(axis=1), w34), {"a": a, "b": b}),
        "concatenate": (
            lambda: (tensor.concatenate([a, b], axis=1) ** 2).sum(),
            {"a": a, "b": b},
        ),
        "masked_fill": (lambda: _weighted_sum(tensor.masked_fill(a, mask, 0.5), w34), {"a": a}),
        "gelu": (lambda: _weighted_sum(F.gelu(a), w34), {"a": a}),
        "softmax": (lambda: _weighted_sum(F.softmax(a, axis=-1), w34), {"a": a}),
        "log_softmax": (lambda: _weighted_sum(F.log_softmax(a, axis=0), w34), {"a": a}),
        "log1m_exp": (lambda: _weighted_sum(F.log1m_exp(-pos), w34), {"pos": pos}),
        "layer_norm": (
            lambda: _weighted_sum(F.layer_norm(a, gain, bias), w34),
            {"a": a, "gain": gain, "bias": bias},
        ),
        "l2_normalize": (lambda: _weighted_sum(F.l2_normalize(a), w34), {"a": a}),
        "cross_entropy": (lambda: F.cross_entropy(a, targets), {"a": a}),
    }


def _tiny_model_case(rng: RngStream):
    from backbone.model import CameModel
    from config import TrainConfig
    from featurization.bundle import ModalityBundle, collate, modality_widths
    from featurization.encoders import encode_blosum, encode_one_hot
    from featurization.graph import build_residue_graph
    from featurization.tables import ALPHABET

    cfg = TrainConfig(
        d_model=16,
        n_layers=1,
        n_heads=2,
        n_experts=2,
        expert_hidden=8,
        contrast_dim=4,
        contrast_hidden=8,
        classifier_hidden=8,
        gcn_dim=4,
        dropout=0.0,
        max_epochs=4,
        num_classes=3,
        dtype="float64",
    )
    bundles = []
    for i, (length, label) in enumerate([(6, 0), (6, 1), (5, 2), (6, 0)]):
        seq = "".join(ALPHABET[int(j)] for j in rng.integers(0, len(ALPHABET), size=length))
        esm = rng.normal((length, 8))
        features = {
            "onehot": encode_one_hot(seq),
            "blosum": encode_blosum(seq),
            "esm": esm,
            "struct": rng.normal((length, 6)),
            "gcn": esm,
        }
        graph = build_residue_graph(seq, esm, cfg.similarity_threshold)
        bundles.append(ModalityBundle(f"g{i}", seq, label, features, graph.adjacency))

    model = CameModel.init(cfg, modality_widths(bundles), 3, rng.fork("model"))
    batch = collate(bundles, model.widths)

    def total() -> Tensor:
        out = model.forward(batch, training=True, labels=batch.labels)
        return model.loss(out, batch).total

    return total, model.parameters()


def run_gradcheck_suite(
    seed: int = 0,
    trials: int = 3,
    rtol: float = 1e-4,
    model_coords: int | None = 6,
) -> list[GradCheckReport]:
    """Gradient checks for every primitive over ``trials`` random draws, then the
    total loss of a tiny full model (L=6, d=16, K=2, C=3) over all parameter groups."""
    root = RngStream(seed)
    reports = []
    for trial in range(trials):
        for name, (f, params) in _primitive_cases(root.fork(f"trial{trial}")).items():
            reports.append(grad_check(f, params, rtol=rtol, name=f"{name}#{trial}"))

    f, params = _tiny_model_case(root.fork("model"))
    reports.append(
        grad_check(f, params, rtol=rtol, max_coords=model_coords, rng=root.fork("coords"), name="tiny_model")
    )
    failed = [r for r in reports if not r.passed]
    log.info("Gradient suite: %d/%d case(s) passed", len(reports) - len(failed), len(reports))
    return reports
