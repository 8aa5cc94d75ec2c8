"""Randomised finite-difference cases for every differentiable operation.

A case builder takes a generator and returns ``(loss_fn, params)``. Losses
contract the op output against a fixed random tensor, scaled so that the
loss is O(1): this keeps the round-off of central differences well below
the relative-error floor.
"""

from __future__ import annotations

from typing import Callable, Dict, Tuple

import numpy as np

from swinauth import cnn, swin
from swinauth.harness.losses import weighted_bce
from swinauth.tensor import (
    Tensor,
    channel_norm,
    concat,
    conv2d,
    exp,
    gelu,
    layer_norm,
    linear,
    log,
    matmul,
    pad,
    precision,
    relu,
    roll,
    sigmoid,
    softmax,
    sqrt,
    tanh,
)
from swinauth.tensor.gradcheck import check_gradients

Case = Tuple[Callable[[], Tensor], Dict[str, Tensor]]

GRAD_H = 1e-5
GRAD_TOL = 1e-4


def _t(rng, *shape, scale=1.0, offset=0.0):
    return Tensor(offset + scale * rng.standard_normal(shape), requires_grad=True, dtype=np.float64)


def _away_from_zero(rng, *shape):
    v = rng.standard_normal(shape)
    return Tensor(np.sign(v) * (0.2 + np.abs(v)), requires_grad=True, dtype=np.float64)


def _positive(rng, *shape):
    return Tensor(0.5 + rng.random(shape) * 2.0, requires_grad=True, dtype=np.float64)


def _contract(out: Tensor, r: np.ndarray) -> Tensor:
    return (out * r).sum() * (1.0 / np.sqrt(max(r.size, 1)))


def _probe(rng, build: Callable[[Dict[str, Tensor]], Tensor], params: Dict[str, Tensor]) -> Case:
    with precision(np.float64):
        shape = build(params).shape
    r = rng.standard_normal(shape)
    return (lambda: _contract(build(params), r)), params


def _binary(op):
    def case(rng):
        shape_a, shape_b = [(3, 4), (3, 4)], [(2, 3, 4), (4,)]
        sa, sb = (shape_a, shape_b)[int(rng.integers(2))]
        a = _t(rng, *sa)
        b = _positive(rng, *sb) if op == "div" else _t(rng, *sb)
        fns = {"add": lambda p: p["a"] + p["b"], "sub": lambda p: p["a"] - p["b"],
               "mul": lambda p: p["a"] * p["b"], "div": lambda p: p["a"] / p["b"]}
        return _probe(rng, fns[op], {"a": a, "b": b})

    return case


def _unary(fn, domain=_t):
    def case(rng):
        return _probe(rng, lambda p: fn(p["a"]), {"a": domain(rng, 3, 5)})

    return case


def _case_power(rng):
    e = float(rng.choice([2.0, 3.0, 0.5, -1.5]))
    return _probe(rng, lambda p: p["a"] ** e, {"a": _positive(rng, 4, 3)})


def _case_sum(rng):
    axis = [None, 0, 1, (0, 2)][int(rng.integers(4))]
    keep = bool(rng.integers(2))
    return _probe(rng, lambda p: p["a"].sum(axis=axis, keepdims=keep), {"a": _t(rng, 2, 3, 4)})


def _case_mean(rng):
    axis = [None, 1, (1, 2)][int(rng.integers(3))]
    return _probe(rng, lambda p: p["a"].mean(axis=axis), {"a": _t(rng, 2, 3, 4)})


def _case_reshape(rng):
    return _probe(rng, lambda p: p["a"].reshape(4, 6), {"a": _t(rng, 2, 3, 4)})


def _case_transpose(rng):
    axes = tuple(rng.permutation(3).tolist())
    return _probe(rng, lambda p: p["a"].transpose(*axes), {"a": _t(rng, 2, 3, 4)})


def _case_getitem(rng):
    idx = rng.integers(0, 5, size=7)  # repeated indices exercise accumulation
    return _probe(rng, lambda p: p["a"][1:, idx] + p["a"][0, ::2].sum(), {"a": _t(rng, 3, 5)})


def _case_roll(rng):
    s = (int(rng.integers(-3, 4)), int(rng.integers(-3, 4)))
    return _probe(rng, lambda p: roll(p["a"], s, (1, 2)), {"a": _t(rng, 2, 4, 5, 3)})


def _case_concat(rng):
    return _probe(rng, lambda p: concat([p["a"], p["b"]], axis=1), {"a": _t(rng, 2, 3), "b": _t(rng, 2, 4)})


def _case_pad(rng):
    w = ((0, 0), (int(rng.integers(3)), int(rng.integers(3))), (1, 2))
    return _probe(rng, lambda p: pad(p["a"], w), {"a": _t(rng, 2, 3, 4)})


def _case_matmul(rng):
    return _probe(rng, lambda p: matmul(p["a"], p["b"]), {"a": _t(rng, 2, 3, 4), "b": _t(rng, 4, 5)})


def _case_softmax(rng):
    axis = int(rng.choice([-1, 0]))
    return _probe(rng, lambda p: softmax(p["a"], axis=axis), {"a": _t(rng, 4, 6, scale=2.0)})


def _case_layer_norm(rng):
    params = {"x": _t(rng, 3, 4, 6, scale=2.0, offset=1.0), "g": _t(rng, 6, offset=1.0), "b": _t(rng, 6)}
    return _probe(rng, lambda p: layer_norm(p["x"], p["g"], p["b"]), params)


def _case_gelu(rng):
    return _probe(rng, lambda p: gelu(p["a"]), {"a": _t(rng, 4, 5, scale=2.0)})


def _case_linear(rng):
    params = {"x": _t(rng, 2, 3, 4), "w": _t(rng, 4, 5), "b": _t(rng, 5)}
    return _probe(rng, lambda p: linear(p["x"], p["w"], p["b"]), params)


def _case_conv2d(rng):
    stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, 2))
    params = {"x": _t(rng, 2, 6, 5, 3), "k": _t(rng, 3, 3, 3, 4, scale=0.5), "b": _t(rng, 4)}
    return _probe(rng, lambda p: conv2d(p["x"], p["k"], p["b"], stride, padding), params)


def _case_channel_norm(rng):
    params = {"x": _t(rng, 2, 4, 3, 5, scale=2.0, offset=0.5), "g": _t(rng, 5, offset=1.0), "b": _t(rng, 5)}
    return _probe(rng, lambda p: channel_norm(p["x"], p["g"], p["b"]), params)


def _case_weighted_bce(rng):
    y = rng.integers(0, 2, size=8).astype(np.float64)
    w = rng.choice([1.0, 10.0], size=8)
    params = {"z": _t(rng, 8)}
    return (lambda: weighted_bce(sigmoid(params["z"]), y, w)), params


def _block_params(rng, prefix, dim, heads, window, scale=0.3):
    shapes = swin._block_shapes(prefix, dim, heads, window, 4, True)
    params = {}
    for name, shape in shapes.items():
        offset = 1.0 if name.endswith("gamma") else 0.0
        params[name] = _t(rng, *shape, scale=scale, offset=offset)
    return params


def _case_patch_embed(rng):
    params = {"x": _t(rng, 2, 8, 4, 3), "w": _t(rng, 48, 5, scale=0.2), "b": _t(rng, 5)}
    return _probe(rng, lambda p: swin.patch_embed(p["x"], p["w"], p["b"]), params)


def _case_window_roundtrip(rng):
    def build(p):
        w = swin.window_partition(p["x"], 2)
        return swin.window_reverse(w * w, 2, 4, 6)

    return _probe(rng, build, {"x": _t(rng, 2, 4, 6, 3)})


def _case_patch_merge(rng):
    params = {"x": _t(rng, 2, 4, 6, 3), "w": _t(rng, 12, 6, scale=0.3), "g": _t(rng, 12, offset=1.0), "b": _t(rng, 12)}
    return _probe(rng, lambda p: swin.patch_merge(p["x"], p["w"], (p["g"], p["b"])), params)


def _attn_params(rng, prefix, dim, heads, window):
    return {k: v for k, v in _block_params(rng, "blk", dim, heads, window).items() if k.startswith(prefix)}


def _case_window_attention(rng):
    params = _attn_params(rng, "blk.attn", 8, 2, 2)
    params["x"] = _t(rng, 2, 4, 4, 8)
    return _probe(rng, lambda p: swin.shifted_window_attention(p["x"], p, "blk.attn", 2, 2, 0), params)


def _case_shifted_window_attention(rng):
    params = _attn_params(rng, "blk.attn", 8, 2, 2)
    params["x"] = _t(rng, 2, 4, 4, 8)
    return _probe(rng, lambda p: swin.shifted_window_attention(p["x"], p, "blk.attn", 2, 2, 1), params)


def _case_swin_pair(rng):
    params = {}
    for b in range(2):
        params.update(_block_params(rng, f"pair.blocks.{b}", 8, 2, 2))
    params["x"] = _t(rng, 2, 4, 4, 8)
    return _probe(rng, lambda p: swin.swin_pair(p["x"], p, "pair", 2, 2, 1), params)


TOY_SWIN = swin.SwinConfig(
    input_size=(16, 16), embed_dim=4, depths=(1, 1), num_heads=(1, 2), window_size=2, name="swin-grad-toy"
)
TOY_CNN = cnn.BaselineConfig(input_size=(8, 8), widths=(3, 4), blocks=(1, 1), name="cnn-grad-toy")


def _randomised(params: Dict[str, Tensor], rng, scale: float) -> Dict[str, Tensor]:
    out = {}
    for name, p in params.items():
        base = p.data.astype(np.float64)
        out[name] = Tensor(base + scale * rng.standard_normal(base.shape), requires_grad=True, dtype=np.float64)
    return out


def _case_swin_forward(rng):
    params = _randomised(swin.init_params(TOY_SWIN, rng, np.float64), rng, 0.2)
    images = rng.random((2, 16, 16, 3))
    y = np.array([1.0, 0.0])
    return (lambda: weighted_bce(swin.forward(images, TOY_SWIN, params), y)), params


def _case_cnn_forward(rng):
    params = _randomised(cnn.init_params(TOY_CNN, rng, np.float64), rng, 0.1)
    images = rng.random((2, 8, 8, 3))
    y = np.array([1.0, 0.0])
    return (lambda: weighted_bce(cnn.forward(images, TOY_CNN, params), y)), params


CASES: Dict[str, Callable[[np.random.Generator], Case]] = {
    "add": _binary("add"),
    "sub": _binary("sub"),
    "mul": _binary("mul"),
    "div": _binary("div"),
    "neg": _unary(lambda a: -a),
    "power": _case_power,
    "exp": _unary(exp),
    "log": _unary(log, _positive),
    "sqrt": _unary(sqrt, _positive),
    "tanh": _unary(tanh),
    "sigmoid": _unary(sigmoid),
    "relu": _unary(relu, _away_from_zero),
    "sum": _case_sum,
    "mean": _case_mean,
    "reshape": _case_reshape,
    "transpose": _case_transpose,
    "getitem": _case_getitem,
    "roll": _case_roll,
    "concat": _case_concat,
    "pad": _case_pad,
    "matmul": _case_matmul,
    "softmax": _case_softmax,
    "layer_norm": _case_layer_norm,
    "gelu": _case_gelu,
    "linear": _case_linear,
    "conv2d": _case_conv2d,
    "channel_norm": _case_channel_norm,
    "weighted_bce": _case_weighted_bce,
    "patch_embed": _case_patch_embed,
    "window_partition_reverse": _case_window_roundtrip,
    "patch_merge": _case_patch_merge,
    "window_attention": _case_window_attention,
    "shifted_window_attention": _case_shifted_window_attention,
    "swin_pair": _case_swin_pair,
    "swin_forward": _case_swin_forward,
    "cnn_forward": _case_cnn_forward,
}

# large cases probe a random subset of entries per parameter
MAX_ENTRIES = {"swin_pair": 8, "swin_forward": 4, "cnn_forward": 6, "window_attention": 24, "shifted_window_attention": 24}


def run_case(name: str, seed: int) -> float:
    """Largest relative error over all parameters of one randomised instance."""
    rng = np.random.default_rng(seed)
    with precision(np.float64):
        loss_fn, params = CASES[name](rng)
        errors = check_gradients(loss_fn, params, h=GRAD_H, max_entries=MAX_ENTRIES.get(name), rng=rng)
    return max(errors.values())
