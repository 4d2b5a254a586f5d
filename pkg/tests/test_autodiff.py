import math

import numpy as np
import pytest

from causaltune import autodiff as ad
from causaltune import gradsuite
from causaltune.errors import UsageError, ValidationError
from causaltune.spectral import Backend, forward_terms


def test_square_derivative():
    x = ad.param(np.array(3.0), "x")
    assert ad.backward(x * x)["x"] == pytest.approx(6.0)


def test_dct_energy_gradient_is_2f(rng):
    f = rng.normal(size=(1, 6, 5, 2))
    t = ad.param(f, "f")
    (S,) = ad.linear_terms([t], forward_terms(Backend.DCT, 6, 5))
    g = ad.backward(ad.sum_all(ad.square(S)))["f"]
    assert np.max(np.abs(g - 2 * f)) <= 1e-9


def _check(loss_fn, params, tol=1e-7):
    rep = ad.finite_diff_check(loss_fn, params, n_coords=300)
    assert rep.max_rel_error <= tol, (rep.worst_param, rep.worst_index, rep.max_rel_error)


def test_elementwise_and_broadcast_ops(rng):
    P = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=4)}
    proj = rng.normal(size=(3, 4))
    _check(lambda t: ad.sum_all((t["a"] * t["b"] - t["b"] + t["a"]) * proj), P)


def test_matmul_batched(rng):
    P = {"x": rng.normal(size=(2, 3, 4)), "w": rng.normal(size=(4, 5))}
    proj = rng.normal(size=(2, 3, 5))
    _check(lambda t: ad.sum_all(ad.matmul(t["x"], t["w"]) * proj), P)
    P = {"x": rng.normal(size=(2, 3, 4)), "y": rng.normal(size=(2, 4, 2))}
    _check(lambda t: ad.sum_all(ad.square(ad.matmul(t["x"], t["y"]))), P)


def test_reshape_transpose(rng):
    P = {"x": rng.normal(size=(2, 3, 4))}
    proj = rng.normal(size=(4, 6))
    _check(lambda t: ad.sum_all(ad.reshape(ad.transpose(t["x"], (2, 0, 1)), (4, 6)) * proj), P)


def test_softmax_gelu_layer_norm(rng):
    P = {"x": rng.normal(size=(3, 5)), "g": rng.normal(size=5), "b": rng.normal(size=5)}
    proj = rng.normal(size=(3, 5))
    _check(lambda t: ad.sum_all(ad.softmax(t["x"]) * proj), {"x": P["x"]})
    _check(lambda t: ad.sum_all(ad.gelu(t["x"]) * proj), {"x": P["x"]})
    _check(lambda t: ad.sum_all(ad.layer_norm(t["x"], t["g"], t["b"]) * proj), P)


def test_upsample_and_cross_entropy(rng):
    labels = rng.integers(0, 3, size=(1, 4, 4))
    P = {"z": rng.normal(size=(1, 2, 2, 3))}
    _check(lambda t: ad.cross_entropy(ad.upsample_nearest(t["z"], 2), labels), P)


def test_cross_entropy_value():
    z = np.array([[1.0, 2.0, 0.5]])
    expect = -(2.0 - math.log(math.exp(1) + math.exp(2) + math.exp(0.5)))
    assert float(ad.cross_entropy(z, np.array([1])).data) == pytest.approx(expect, abs=1e-14)
    big = np.array([[1000.0, 0.0]])
    assert float(ad.cross_entropy(big, np.array([0])).data) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("backend", list(Backend))
def test_linear_terms_adjoint(rng, backend):
    P = {"f": rng.normal(size=(2, 4, 6, 2))}
    terms = forward_terms(backend, 4, 6)
    projs = [rng.normal(size=(2, 4, 6, 2)) for _ in terms]

    def loss(t):
        out = ad.linear_terms([t["f"]], terms)
        total = ad.sum_all(out[0] * projs[0])
        for o, p in zip(out[1:], projs[1:]):
            total = total + ad.sum_all(o * p)
        return total

    _check(loss, P)


def test_backward_errors(rng):
    with pytest.raises(UsageError):
        ad.backward(ad.Tensor(np.array(1.0)))
    x = ad.param(rng.normal(size=3), "x")
    with pytest.raises(UsageError):
        ad.backward(x * 2.0)
    y = ad.param(rng.normal(size=3), "x")
    with pytest.raises(UsageError):
        ad.backward(ad.sum_all(x + y))


def test_unused_leaf_gets_zero():
    x = ad.param(np.ones(2), "x")
    y = ad.param(np.ones(3), "y")
    g = ad.backward(ad.sum_all(x) + ad.sum_all(y * 0.0))
    assert g["y"].shape == (3,) and not g["y"].any()


def test_linear_model_check_exact():
    x = 1.7
    rep = ad.finite_diff_check(lambda t: ad.square(t["w"] * x), {"w": np.array(0.6)})
    assert rep.max_rel_error <= 1e-9


def test_check_samples_at_least_200_coords(rng):
    P = {"a": rng.normal(size=(30, 30)), "b": rng.normal(size=5)}
    rep = ad.finite_diff_check(lambda t: ad.sum_all(ad.square(t["a"])) + ad.sum_all(t["b"]), P, n_coords=200)
    assert rep.n_coords >= 105 and set(rep.per_param) == {"a", "b"}
    rep = ad.finite_diff_check(lambda t: ad.sum_all(ad.square(t["a"])), {"a": P["a"]}, n_coords=250)
    assert rep.n_coords == 250


def test_relative_error_floor():
    assert ad.relative_error(0.0, 0.0) == 0.0
    assert ad.relative_error(1.0, 1.0 + 1e-9) == pytest.approx(1e-9, rel=1e-6)


# AdamW ---------------------------------------------------------------------


def _adamw_scalar(w, grads, lr, b1, b2, eps, wd):
    """Straight transcription of the recurrence, one scalar at a time."""
    m = v = 0.0
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        w = w - lr * wd * w - lr * mh / (math.sqrt(vh) + eps)
    return w


def test_adamw_defaults():
    s = ad.AdamWState()
    assert (s.lr, s.beta1, s.beta2, s.eps, s.weight_decay, s.t) == (1e-4, 0.9, 0.999, 1e-8, 0.01, 0)
    assert ad.DEFAULT_LR == 1e-4


def test_adamw_single_step_by_hand():
    state = ad.AdamWState(lr=0.1, weight_decay=0.0)
    p, state = ad.adamw_step({"w": np.array(1.0)}, {"w": np.array(1.0)}, state)
    # m_hat = v_hat = 1 after bias correction, so w = 1 - 0.1 / (1 + 1e-8)
    assert float(p["w"]) == pytest.approx(1 - 0.1 / (1 + 1e-8), abs=1e-15)
    assert float(p["w"]) == pytest.approx(0.9, abs=1e-8)
    assert state.t == 1


def test_adamw_matches_scalar_recurrence(rng):
    grads = rng.normal(size=(7, 3))
    w0 = rng.normal(size=3)
    params, state = {"w": w0.copy()}, ad.AdamWState(lr=0.05, weight_decay=0.1)
    for g in grads:
        params, state = ad.adamw_step(params, {"w": g}, state)
    for i in range(3):
        ref = _adamw_scalar(w0[i], grads[:, i], 0.05, 0.9, 0.999, 1e-8, 0.1)
        assert params["w"][i] == pytest.approx(ref, abs=1e-14)
    assert state.t == 7


def test_adamw_zero_grad_no_decay_is_identity(rng):
    w = rng.normal(size=(2, 2))
    p, _ = ad.adamw_step({"w": w}, {"w": np.zeros((2, 2))}, ad.AdamWState(weight_decay=0.0))
    np.testing.assert_array_equal(p["w"], w)


def test_adamw_does_not_mutate_inputs():
    w = np.ones(3)
    state = ad.AdamWState()
    ad.adamw_step({"w": w}, {"w": np.ones(3)}, state)
    assert state.t == 0 and not state.m and np.all(w == 1)


def test_adamw_validation():
    with pytest.raises(ValidationError):
        ad.adamw_step({"w": np.ones(3)}, {"w": np.ones(2)}, ad.AdamWState())
    with pytest.raises(ValidationError):
        ad.adamw_step({"w": np.ones(3)}, {"v": np.ones(3)}, ad.AdamWState())


# composed suite -------------------------------------------------------------


def test_refine_op_gradients():
    res = gradsuite.check_refine(depth=1)
    assert res.report.max_rel_error <= 1e-6, res.line()
    assert res.report.n_coords >= 200


@pytest.mark.parametrize("backend", list(Backend))
def test_causal_tune_gradients(backend):
    res = gradsuite.check_causal_tune(backend)
    assert res.report.max_rel_error <= 1e-5, res.line()
    assert "f" in res.report.per_param
