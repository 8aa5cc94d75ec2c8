import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from swinauth.errors import DimensionError, NumericError, UsageError, WeightsError
from swinauth.tensor import (
    AdamState,
    Tensor,
    adam_step,
    conv2d,
    gelu,
    he_normal_init,
    layer_norm,
    linear,
    load_weights,
    matmul,
    no_grad,
    precision,
    save_weights,
    sigmoid,
    softmax,
)
from swinauth.tensor.init import he_sigma
from swinauth.tensor.gradcheck import check_gradients, relative_error
from swinauth.tensor.serialize import MAGIC, assign_weights, dumps, loads

finite = st.floats(-50, 50, allow_nan=False, width=64)


def t64(values, grad=True):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=grad, dtype=np.float64)


# -- matmul ------------------------------------------------------------------


def test_matmul_identity():
    out = matmul(Tensor(np.eye(2)), Tensor([[3, 4], [5, 6]]))
    np.testing.assert_array_equal(out.data, [[3, 4], [5, 6]])


def test_matmul_hand_arithmetic():
    assert matmul(Tensor([[1, 2]]), Tensor([[3], [4]])).data.tolist() == [[11.0]]


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 5\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))


def test_matmul_gradients_tight(rng):
    a, b = t64(rng.normal(size=(3, 3))), t64(rng.normal(size=(3, 3)))
    errs = check_gradients(lambda: (matmul(a, b) * np.arange(9).reshape(3, 3)).sum(), {"a": a, "b": b})
    assert max(errs.values()) < 1e-6


# -- softmax -----------------------------------------------------------------


@pytest.mark.parametrize(
    "x, expected",
    [([0.0, 0.0], [0.5, 0.5]), ([1000.0, 1000.0], [0.5, 0.5]), ([math.log(1), math.log(3)], [0.25, 0.75])],
)
def test_softmax_examples(x, expected):
    np.testing.assert_allclose(softmax(t64(x)).data, expected, atol=1e-12)


def test_softmax_rejects_non_finite():
    with pytest.raises(NumericError):
        softmax(Tensor([0.0, np.inf]))


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=st.floats(-1e4, 1e4)))
def test_softmax_rows_sum_to_one(x):
    out = softmax(Tensor(x, dtype=np.float64), axis=-1).data
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-6)


# -- layer_norm --------------------------------------------------------------


def test_layer_norm_constant_row_is_zero():
    out = layer_norm(t64([[5, 5, 5, 5]]), t64(np.ones(4)), t64(np.zeros(4)))
    np.testing.assert_array_equal(out.data, [[0, 0, 0, 0]])


def test_layer_norm_two_values():
    out = layer_norm(t64([1.0, 3.0]), t64([1.0, 1.0]), t64([0.0, 0.0]), eps=1e-12)
    np.testing.assert_allclose(out.data, [-1.0, 1.0], atol=1e-9)


def test_layer_norm_zero_length_axis():
    with pytest.raises(DimensionError):
        layer_norm(Tensor(np.zeros((2, 0))), Tensor(np.zeros(0)), Tensor(np.zeros(0)))


def test_layer_norm_gradients(rng):
    x, g, b = t64(rng.normal(size=(3, 5))), t64(rng.normal(size=5)), t64(rng.normal(size=5))
    r = rng.normal(size=(3, 5))
    errs = check_gradients(lambda: (layer_norm(x, g, b) * r).sum(), {"x": x, "g": g, "b": b})
    assert max(errs.values()) < 1e-5


@given(
    arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 16)), elements=st.floats(-100, 100)),
)
def test_layer_norm_moments(x):
    spread = x.max(axis=-1) - x.min(axis=-1)
    if np.any(spread < 1e-2):
        return  # degenerate rows: eps dominates the variance
    n = x.shape[-1]
    out = layer_norm(Tensor(x, dtype=np.float64), Tensor(np.ones(n), dtype=np.float64), Tensor(np.zeros(n), dtype=np.float64))
    assert np.all(np.abs(out.data.mean(axis=-1)) < 1e-6)
    var = out.data.var(axis=-1)
    rel = x.var(axis=-1) / (x.var(axis=-1) + 1e-5)  # eps shrinks the variance by a known factor
    assert np.all(np.abs(var - rel) < 1e-4)


# -- gelu ----------------------------------------------------------------------


def _gelu_reference(x):
    return 0.5 * x * (1 + math.tanh(math.sqrt(2 / math.pi) * (x + 0.044715 * x**3)))


def test_gelu_values():
    assert gelu(t64([0.0])).data[0] == 0.0
    assert gelu(t64([1.0])).data[0] == pytest.approx(_gelu_reference(1.0), abs=1e-12)
    assert gelu(t64([1.0])).data[0] == pytest.approx(0.8412, abs=1e-4)
    assert gelu(t64([30.0])).data[0] == pytest.approx(30.0)
    assert abs(gelu(t64([-30.0])).data[0]) < 1e-12


# -- linear / conv2d -----------------------------------------------------------


def test_linear_identity_and_example():
    x = t64(np.arange(6).reshape(2, 3))
    np.testing.assert_array_equal(linear(x, t64(np.eye(3)), t64(np.zeros(3))).data, x.data)
    assert linear(t64([1.0, 1.0]), t64([[1.0], [1.0]]), t64([1.0])).data.tolist() == [3.0]


def test_linear_shape_error():
    with pytest.raises(DimensionError):
        linear(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_conv2d_unit_kernel_is_identity(rng):
    x = Tensor(rng.normal(size=(2, 5, 4, 3)))
    k = Tensor(np.eye(3).reshape(1, 1, 3, 3))
    np.testing.assert_allclose(conv2d(x, k).data, x.data, atol=1e-6)


def test_conv2d_average_of_constant():
    x = Tensor(np.full((1, 6, 6, 1), 2.5))
    k = Tensor(np.full((3, 3, 1, 1), 1 / 9))
    out = conv2d(x, k, padding=1).data
    np.testing.assert_allclose(out[0, 1:-1, 1:-1, 0], 2.5, atol=1e-6)


def test_conv2d_kernel_too_large():
    with pytest.raises(DimensionError):
        conv2d(Tensor(np.ones((1, 2, 2, 1))), Tensor(np.ones((5, 5, 1, 1))))


def test_conv2d_gradients_small_input(rng):
    x = t64(rng.normal(size=(1, 4, 4, 2)))
    k = t64(rng.normal(size=(3, 3, 2, 3)))
    r = rng.normal(size=(1, 4, 4, 3))
    errs = check_gradients(lambda: (conv2d(x, k, padding=1) * r).sum(), {"x": x, "k": k})
    assert max(errs.values()) < 1e-6


# -- adam --------------------------------------------------------------------


def test_adam_defaults():
    s = AdamState()
    assert (s.learning_rate, s.beta1, s.beta2, s.epsilon, s.step) == (1e-4, 0.9, 0.999, 1e-8, 0)


def test_adam_zero_gradient_is_noop():
    p = {"w": Tensor([1.0, -2.0])}
    state = AdamState()
    adam_step(p, {"w": np.zeros(2)}, state)
    np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])
    assert state.step == 1


def test_adam_first_step_magnitude():
    p = {"w": Tensor([0.0], dtype=np.float64)}
    adam_step(p, {"w": np.array([1.0])}, AdamState())
    assert p["w"].data[0] == pytest.approx(-1e-4, rel=1e-6)


def test_adam_ten_steps_on_square_match_recurrence():
    w = Tensor([1.0], dtype=np.float64)
    state = AdamState(learning_rate=0.05)
    ref, m, v = 1.0, 0.0, 0.0
    prev = abs(w.data[0])
    for t in range(1, 11):
        g = 2 * w.data.copy()
        adam_step({"w": w}, {"w": g}, state)
        gr = 2 * ref
        m = 0.9 * m + 0.1 * gr
        v = 0.999 * v + 0.001 * gr * gr
        ref -= 0.05 * (m / (1 - 0.9**t)) / (math.sqrt(v / (1 - 0.999**t)) + 1e-8)
        assert w.data[0] == pytest.approx(ref, abs=1e-12)
        assert abs(w.data[0]) < prev
        prev = abs(w.data[0])


def test_adam_rejects_non_finite_gradient_by_name():
    with pytest.raises(NumericError, match="bad"):
        adam_step({"bad": Tensor([1.0])}, {"bad": np.array([np.nan])}, AdamState())


@given(arrays(np.float64, 3, elements=finite), st.floats(1e-6, 1.0))
def test_adam_zero_grad_noop_fresh_state(start, lr):
    p = {"w": Tensor(start, dtype=np.float64)}
    adam_step(p, {"w": np.zeros(3)}, AdamState(learning_rate=lr))
    np.testing.assert_array_equal(p["w"].data, start)


# -- init ----------------------------------------------------------------------


def test_he_normal_examples(rng):
    w = he_normal_init(8, rng, (2000,))
    assert np.all(np.abs(w) <= 1.0)  # sigma 0.5, truncated at 2 sigma
    assert he_sigma(8) == 0.5
    assert he_sigma(2) == 1.0


def test_he_normal_std_large_sample(rng):
    w = he_normal_init(50, rng, (100_000,))
    sigma = math.sqrt(2 / 50)
    # variance of a standard normal truncated at +-2
    phi = math.exp(-2) / math.sqrt(2 * math.pi)
    mass = math.erf(2 / math.sqrt(2))
    trunc_sd = math.sqrt(1 - 2 * 2 * phi / mass)
    assert abs(w.std() / (sigma * trunc_sd) - 1) < 0.05
    assert np.abs(w).max() <= 2 * sigma


def test_he_normal_deterministic():
    a = he_normal_init(10, np.random.default_rng(3), (5,))
    b = he_normal_init(10, np.random.default_rng(3), (5,))
    np.testing.assert_array_equal(a, b)


def test_he_normal_rejects_zero_fan_in(rng):
    with pytest.raises(ValueError):
        he_normal_init(0, rng)


# -- backward ------------------------------------------------------------------


def test_backward_sum_gives_ones():
    x = t64(np.ones((2, 2)))
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones((2, 2)))


def test_backward_square():
    x = t64([1.0, 2.0])
    (x * x).sum().backward()
    np.testing.assert_array_equal(x.grad, [2.0, 4.0])


def test_backward_accumulates():
    x = t64([1.0, 2.0])
    (x * 3).sum().backward()
    (x * 3).sum().backward()
    np.testing.assert_array_equal(x.grad, [6.0, 6.0])


def test_backward_non_scalar_is_usage_error():
    with pytest.raises(UsageError):
        (t64([1.0, 2.0]) * 2).backward()


def test_every_reachable_tensor_gets_grad():
    x = t64([1.0, 2.0])
    y = x * 2
    z = y.exp()
    z.sum().backward()
    assert y.grad is not None and z.grad is not None and x.grad.shape == x.shape


def test_no_grad_records_nothing():
    x = t64([1.0])
    with no_grad():
        y = x * 2
    assert not y.requires_grad


def test_forward_is_bit_deterministic(rng):
    a = rng.normal(size=(4, 8)).astype(np.float32)
    w = rng.normal(size=(8, 3)).astype(np.float32)
    outs = [gelu(linear(Tensor(a), Tensor(w))).data for _ in range(3)]
    assert all(np.array_equal(outs[0], o) for o in outs)


def test_precision_context():
    with precision(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32


def test_relative_error_floor():
    assert relative_error(np.array([0.0]), np.array([0.0])) == 0.0
    assert relative_error(np.array([1.0]), np.array([1.0 + 1e-6])) == pytest.approx(1e-6, rel=1e-3)


# -- weight container ------------------------------------------------------------


def test_weights_roundtrip_bit_exact(tmp_path, rng):
    arrays_ = {"a.b": rng.normal(size=(3, 4)).astype(np.float32), "scalar": np.float32(2.5) * np.ones(()), "z": np.zeros(0)}
    path = tmp_path / "w.swt"
    save_weights(path, arrays_)
    back = load_weights(path)
    assert list(back) == list(arrays_)
    for k in arrays_:
        assert back[k].shape == np.shape(arrays_[k])
        np.testing.assert_array_equal(back[k], np.asarray(arrays_[k], dtype=np.float32))
    assert path.read_bytes().startswith(MAGIC)


def test_weights_reject_garbage():
    with pytest.raises(WeightsError):
        loads(b"not a container")
    with pytest.raises(WeightsError):
        loads(dumps({"a": np.ones(2, np.float32)}) + b"x")


def test_assign_weights_validates():
    params = {"w": Tensor(np.zeros((2, 2)))}
    with pytest.raises(WeightsError):
        assign_weights(params, {"w": np.zeros((3, 2), np.float32)})
    with pytest.raises(WeightsError):
        assign_weights(params, {"other": np.zeros((2, 2), np.float32)})
    assign_weights(params, {"w": np.ones((2, 2), np.float32)})
    np.testing.assert_array_equal(params["w"].data, np.ones((2, 2)))


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_sigmoid_stays_in_open_interval(dtype):
    out = sigmoid(Tensor([-1e4, -200.0, 0.0, 40.0, 1e4], dtype=dtype)).data
    assert np.all((out > 0) & (out < 1))
    assert out[2] == 0.5
