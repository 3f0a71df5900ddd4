"""Finite-difference verification of every differentiable op and of the full
composed training objective.

For each case we build a scalar loss from leaf tensors, read the analytic
gradients off one backward pass, then perturb every leaf element by +/-h
(central differences, h = 1e-5) and compare:

    rel_err = |analytic - fd| / max(1, |fd|)

All cases must stay below 1e-4. Inputs are kept away from kinks (ReLU at 0)
so the difference quotient is well defined.
"""

from __future__ import annotations

import json

import numpy as np

from . import tensor as T
from .data import Batch, BatchSample
from .encoders import EncoderStack, ModalityFeatures
from .losses import LossConfig, compute_centroids, loss_total
from .rng import Stream
from .tensor import Tensor, backward

TOLERANCE = 1e-4
STEP = 1e-5


def max_rel_err(leaves: list[Tensor], forward, h: float = STEP) -> float:
    """Worst elementwise relative error between analytic and FD gradients."""
    loss = forward()
    backward(loss)
    worst = 0.0
    for leaf in leaves:
        analytic = np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad.copy()
        flat = leaf.data.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = forward().item()
            flat[i] = keep - h
            down = forward().item()
            flat[i] = keep
            fd = (up - down) / (2.0 * h)
            err = abs(aflat[i] - fd) / max(1.0, abs(fd))
            if err > worst:
                worst = err
        leaf.grad = None
    return worst


def _leaf(stream: Stream, shape, lo=-1.0, hi=1.0) -> Tensor:
    u = stream.uniform(shape)
    return Tensor(lo + (hi - lo) * u, requires_grad=True)


def _wsum(t: Tensor, stream: Stream) -> Tensor:
    """Weighted sum with fixed random weights: makes upstream grads non-constant."""
    w = Tensor(stream.uniform(t.shape) + 0.5)
    return T.sum_all(T.mul(t, w))


def _case_matmul(s):
    a, b = _leaf(s, (4, 5)), _leaf(s, (5, 3))
    return [a, b], lambda: _wsum(T.matmul(a, b), Stream(7, "w"))


def _case_add(s):
    a, b = _leaf(s, (3, 4)), _leaf(s, (3, 4))
    return [a, b], lambda: _wsum(T.add(a, b), Stream(7, "w"))


def _case_sub(s):
    a, b = _leaf(s, (3, 4)), _leaf(s, (3, 4))
    return [a, b], lambda: _wsum(T.sub(a, b), Stream(7, "w"))


def _case_mul(s):
    a, b = _leaf(s, (3, 4)), _leaf(s, (3, 4))
    return [a, b], lambda: _wsum(T.mul(a, b), Stream(7, "w"))


def _case_neg(s):
    a = _leaf(s, (3, 4))
    return [a], lambda: _wsum(T.neg(a), Stream(7, "w"))


def _case_scale(s):
    a = _leaf(s, (3, 4))
    return [a], lambda: _wsum(T.scale(a, 0.37), Stream(7, "w"))


def _case_add_scalar(s):
    a = _leaf(s, (3, 4))
    return [a], lambda: _wsum(T.add_scalar(a, 1.25), Stream(7, "w"))


def _case_relu(s):
    raw = s.uniform((4, 5)) * 2.0 - 1.0
    raw = np.where(np.abs(raw) < 0.05, 0.2, raw)  # keep FD away from the kink
    a = Tensor(raw, requires_grad=True)
    return [a], lambda: _wsum(T.relu(a), Stream(7, "w"))


def _case_exp(s):
    a = _leaf(s, (3, 4), -1.5, 1.5)
    return [a], lambda: _wsum(T.exp(a), Stream(7, "w"))


def _case_log(s):
    a = _leaf(s, (3, 4), 0.2, 3.0)
    return [a], lambda: _wsum(T.log(a), Stream(7, "w"))


def _case_transpose(s):
    a = _leaf(s, (3, 5))
    return [a], lambda: _wsum(T.transpose(a), Stream(7, "w"))


def _case_dot(s):
    a, b = _leaf(s, (6,)), _leaf(s, (6,))
    return [a, b], lambda: T.dot(a, b)


def _case_add_rowvec(s):
    x, b = _leaf(s, (4, 3)), _leaf(s, (3,))
    return [x, b], lambda: _wsum(T.add_rowvec(x, b), Stream(7, "w"))


def _case_sum_all(s):
    a = _leaf(s, (3, 4))
    return [a], lambda: T.sum_all(a)


def _case_mean_axis0(s):
    a = _leaf(s, (5, 3))
    return [a], lambda: _wsum(T.mean_axis0(a), Stream(7, "w1"))


def _case_logsumexp_all(s):
    a = _leaf(s, (3, 4), -2.0, 2.0)
    return [a], lambda: T.logsumexp_all(a)


def _case_stack_rows(s):
    rows = [_leaf(s, (4,)) for _ in range(3)]
    return rows, lambda: _wsum(T.stack_rows(rows), Stream(7, "w"))


def _case_concat_cols(s):
    parts = [_leaf(s, (3, 2)), _leaf(s, (3, 4)), _leaf(s, (3, 1))]
    return parts, lambda: _wsum(T.concat_cols(parts), Stream(7, "w"))


def _case_slice_cols(s):
    a = _leaf(s, (3, 6))
    return [a], lambda: _wsum(T.slice_cols(a, 1, 4), Stream(7, "w"))


def _case_gather_rows(s):
    a = _leaf(s, (5, 3))
    idx = [0, 2, 2, 4]  # repeated row exercises the scatter-add
    return [a], lambda: _wsum(T.gather_rows(a, idx), Stream(7, "w"))


def _case_scatter_rows(s):
    a = _leaf(s, (3, 4))
    return [a], lambda: _wsum(T.scatter_rows(a, [4, 0, 2], 6), Stream(7, "w"))


def _case_diag_part(s):
    a = _leaf(s, (4, 4))
    return [a], lambda: _wsum(T.diag_part(a), Stream(7, "w1"))


def _case_softmax_rows(s):
    a = _leaf(s, (4, 6), -2.0, 2.0)
    return [a], lambda: _wsum(T.softmax_rows(a), Stream(7, "w"))


def _case_l2_normalize_rows(s):
    raw = s.uniform((4, 5)) + 0.5  # rows bounded away from zero norm
    a = Tensor(raw, requires_grad=True)
    return [a], lambda: _wsum(T.l2_normalize_rows(a), Stream(7, "w"))


def _case_layer_norm_rows(s):
    x = _leaf(s, (4, 6), -2.0, 2.0)
    gamma = _leaf(s, (6,), 0.5, 1.5)
    beta = _leaf(s, (6,), -0.5, 0.5)
    return [x, gamma, beta], lambda: _wsum(T.layer_norm_rows(x, gamma, beta), Stream(7, "w"))


def _case_cross_entropy_rows(s):
    logits = _leaf(s, (5, 4), -2.0, 2.0)
    labels = s.integers(5, 4)
    return [logits], lambda: T.cross_entropy_rows(logits, labels)


OP_CASES = {
    "add": _case_add, "sub": _case_sub, "mul": _case_mul, "neg": _case_neg,
    "scale": _case_scale, "add_scalar": _case_add_scalar, "relu": _case_relu,
    "exp": _case_exp, "log": _case_log, "matmul": _case_matmul,
    "transpose": _case_transpose, "dot": _case_dot, "add_rowvec": _case_add_rowvec,
    "sum_all": _case_sum_all, "mean_axis0": _case_mean_axis0,
    "logsumexp_all": _case_logsumexp_all, "stack_rows": _case_stack_rows,
    "concat_cols": _case_concat_cols, "slice_cols": _case_slice_cols,
    "gather_rows": _case_gather_rows, "scatter_rows": _case_scatter_rows,
    "diag_part": _case_diag_part, "softmax_rows": _case_softmax_rows,
    "l2_normalize_rows": _case_l2_normalize_rows,
    "layer_norm_rows": _case_layer_norm_rows,
    "cross_entropy_rows": _case_cross_entropy_rows,
}


def tiny_training_setup(seed: int):
    """A miniature encoder stack plus one mixed-availability batch."""
    stack = EncoderStack(d_video_raw=3, d_audio_raw=3, vocab=6, d_model=4,
                         n_heads=1, n_layers=1, d_ff=4, d_proj=3,
                         audio_hidden=4, max_text_len=16, seed=seed)
    s = Stream(seed, "batch")
    samples = []
    for i in range(3):
        video = Tensor(s.normal((2, 3)))
        audio = Tensor(s.normal((2, 3))) if i != 1 else None       # sample 1: no audio
        text = s.integers(2, 6) if i != 2 else None                # sample 2: no text
        samples.append(BatchSample(f"g{i}", i % 2, ModalityFeatures(video, audio, text)))
    return stack, Batch(samples)


def end_to_end_case(seed: int):
    stack, batch = tiny_training_setup(seed)
    cfg = LossConfig(tau=0.2)
    leaves = [p for _, p in stack.parameters()]

    def forward():
        emb = stack.embed_batch(batch)
        cents = compute_centroids(emb)
        return loss_total(emb, cents, cfg).total

    return leaves, forward


def run_all(seed: int = 0, instances: int = 20, end_to_end_instances: int | None = None,
            corrupt: tuple[str, float] | None = None) -> dict:
    """Run every op case and the composed objective; return a JSON-able report.

    `corrupt=(op, factor)` scales that op's backward output during the run,
    demonstrating that a broken gradient rule is detected.
    """
    if end_to_end_instances is None:
        end_to_end_instances = instances
    if corrupt is not None:
        T._GRAD_FAULTS[corrupt[0]] = corrupt[1]
    try:
        ops = {}
        for name, builder in sorted(OP_CASES.items()):
            worst = 0.0
            for k in range(instances):
                leaves, forward = builder(Stream(seed, "case", name, k))
                worst = max(worst, max_rel_err(leaves, forward))
            ops[name] = worst
        e2e = 0.0
        for k in range(end_to_end_instances):
            leaves, forward = end_to_end_case(seed + k)
            e2e = max(e2e, max_rel_err(leaves, forward))
    finally:
        if corrupt is not None:
            T._GRAD_FAULTS.pop(corrupt[0], None)
    worst_overall = max(max(ops.values()), e2e)
    return {
        "ops": ops,
        "end_to_end": e2e,
        "worst": worst_overall,
        "tolerance": TOLERANCE,
        "pass": bool(worst_overall < TOLERANCE),
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
