"""Network forward/backward, softmax policy, Adam, checkpoints."""

import numpy as np
import pytest

from netharvest.approximator import (
    LOGITS,
    VALUES,
    VALUE_SENTINEL,
    AdamState,
    NetSpec,
    ParamSet,
    adam_step,
    backward,
    forward,
    forward_cached,
    init_params,
    load_checkpoint,
    policy_entropy,
    save_checkpoint,
    softmax_policy,
    spec_hash,
)
from netharvest.errors import ConfigError, ContractError


def small_spec(mode=VALUES, k=5, channels=3, n_conv=3):
    return NetSpec(k=k, mode=mode, channels=channels, n_conv=n_conv)


# ------------------------------------------------------------------ forward


def test_zero_params_give_equal_unmasked_outputs():
    spec = small_spec()
    params = ParamSet(spec, np.zeros(spec.n_params, dtype=np.float64))
    x = np.random.default_rng(0).normal(size=(2, 5, 5))
    mask = np.array([True, True, False, True, False])
    out = forward(spec, params, x, mask)
    assert out[0] == out[1] == out[3] == 0.0
    assert out[2] == VALUE_SENTINEL and out[4] == VALUE_SENTINEL


def test_padded_slot_swap_leaves_outputs_unchanged():
    # padding slots are all-zero rows/cols; swapping them is a no-op on the
    # unmasked outputs
    spec = small_spec()
    rng = np.random.default_rng(1)
    params = init_params(spec, 3, dtype=np.float64)
    x = np.zeros((2, 5, 5))
    x[:, :3, :3] = rng.normal(size=(2, 3, 3))
    mask = np.array([True, True, True, False, False])
    out1 = forward(spec, params, x, mask)
    x2 = x.copy()
    x2[:, [3, 4], :] = x2[:, [4, 3], :]
    x2[:, :, [3, 4]] = x2[:, :, [4, 3]]
    out2 = forward(spec, params, x2, mask)
    assert np.allclose(out1[mask], out2[mask])


def test_forward_matches_naive_convolution():
    # k=4, 2 input channels, 1 conv layer: oracle is a direct loop
    spec = NetSpec(k=4, mode=VALUES, channels=3, n_conv=1)
    rng = np.random.default_rng(7)
    params = init_params(spec, 11, dtype=np.float64)
    x = rng.normal(size=(2, 4, 4))

    w = params.get("conv0_w")  # (3, 2, 3, 3)
    b = params.get("conv0_b")
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    conv = np.zeros((3, 4, 4))
    for co in range(3):
        for i in range(4):
            for j in range(4):
                acc = b[co]
                for ci in range(2):
                    for di in range(3):
                        for dj in range(3):
                            acc += w[co, ci, di, dj] * xp[ci, i + di, j + dj]
                conv[co, i, j] = acc
    act = np.maximum(conv, 0.0)
    expect = params.get("head_w") @ act.ravel() + params.get("head_b")

    out = forward(spec, params, x)
    assert np.allclose(out, expect, atol=1e-12)


def test_forward_shape_mismatch_raises():
    spec = small_spec()
    params = init_params(spec, 0)
    with pytest.raises(ContractError):
        forward(spec, params, np.zeros((2, 4, 4)))
    with pytest.raises(ContractError):
        forward(spec, params, np.zeros((3, 5, 5)))


def test_forward_batch_matches_single():
    spec = small_spec(mode=LOGITS)
    params = init_params(spec, 5, dtype=np.float64)
    rng = np.random.default_rng(2)
    xs = rng.normal(size=(4, 2, 5, 5))
    batch = forward(spec, params, xs)
    for i in range(4):
        assert np.allclose(batch[i], forward(spec, params, xs[i]))


# ----------------------------------------------------------------- backward


def fd_gradient(spec, params, x, upstream, mask, h=1e-5):
    flat = params.flat
    g = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up_val = forward(spec, params, x, mask)
        flat[i] = orig - h
        dn_val = forward(spec, params, x, mask)
        flat[i] = orig
        up_sel = np.where(np.isfinite(up_val), up_val, 0.0)
        dn_sel = np.where(np.isfinite(dn_val), dn_val, 0.0)
        # masked slots carry constant sentinels; difference cancels them
        g[i] = np.sum(upstream * (up_sel - dn_sel)) / (2 * h)
    return g


@pytest.mark.parametrize("mode", [VALUES, LOGITS])
def test_backward_matches_finite_differences(mode):
    spec = NetSpec(k=4, mode=mode, channels=3, n_conv=3)
    params = init_params(spec, 9, dtype=np.float64)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(2, 2, 4, 4))
    mask = np.array([[True, True, False, True], [True, False, True, True]])
    upstream = rng.normal(size=(2, 4)) * mask
    analytic = backward(spec, params, x, upstream, mask=mask)
    numeric = fd_gradient(spec, params, x, (upstream).astype(float), mask=None)
    denom = np.maximum(1e-3, np.maximum(np.abs(analytic), np.abs(numeric)))
    assert np.max(np.abs(analytic - numeric) / denom) <= 1e-4


def test_backward_zero_upstream_is_zero():
    spec = small_spec()
    params = init_params(spec, 1, dtype=np.float64)
    x = np.random.default_rng(3).normal(size=(2, 5, 5))
    g = backward(spec, params, x, np.zeros(5))
    assert np.all(g == 0)


def test_backward_masked_slots_contribute_nothing():
    spec = small_spec()
    params = init_params(spec, 2, dtype=np.float64)
    x = np.random.default_rng(5).normal(size=(2, 5, 5))
    mask = np.array([False, True, True, True, True])
    up = np.zeros(5)
    up[0] = 3.0  # only the masked slot carries upstream signal
    g = backward(spec, params, x, up, mask=mask)
    assert np.all(g == 0)


def test_forward_cached_reuses_in_backward():
    spec = small_spec()
    params = init_params(spec, 6, dtype=np.float64)
    rng = np.random.default_rng(8)
    x = rng.normal(size=(3, 2, 5, 5))
    up = rng.normal(size=(3, 5))
    out, cache = forward_cached(spec, params, x)
    g1 = backward(spec, params, x, up, cache=cache)
    g2 = backward(spec, params, x, up)
    assert np.array_equal(g1, g2)
    assert out.shape == (3, 5)


# ------------------------------------------------------------------ softmax


def test_softmax_uniform():
    p = softmax_policy(np.zeros(4), np.ones(4, dtype=bool))
    assert np.allclose(p, 0.25)


def test_softmax_extreme_logit_no_overflow():
    p = softmax_policy(np.array([0.0, 1000.0, 0.0]), np.ones(3, dtype=bool))
    assert np.isfinite(p).all()
    assert p[1] == pytest.approx(1.0)


def test_softmax_shift_invariance():
    z = np.array([0.3, -1.2, 2.0, 0.0])
    m = np.array([True, True, False, True])
    assert np.allclose(softmax_policy(z, m), softmax_policy(z + 17.5, m))


def test_softmax_masked_exactly_zero_and_sums_to_one():
    z = np.random.default_rng(0).normal(size=6)
    m = np.array([True, False, True, False, True, True])
    p = softmax_policy(z, m)
    assert p[1] == 0.0 and p[3] == 0.0
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


def test_softmax_all_masked_raises():
    with pytest.raises(ContractError):
        softmax_policy(np.zeros(3), np.zeros(3, dtype=bool))


def test_entropy_maximal_iff_uniform():
    m = np.array([True, True, True, True, False])
    p_uni = softmax_policy(np.zeros(5), m)
    assert policy_entropy(p_uni) == pytest.approx(np.log(4))
    p_skew = softmax_policy(np.array([1.0, 0, 0, 0, 0]), m)
    assert policy_entropy(p_skew) < np.log(4) - 1e-3


# --------------------------------------------------------------------- Adam


def test_adam_zero_gradient_fixed_point():
    spec = small_spec()
    params = init_params(spec, 0, dtype=np.float64)
    before = params.flat.copy()
    adam = AdamState.for_params(params, lr=1e-3)
    adam_step(adam, params, np.zeros_like(params.flat))
    assert np.array_equal(params.flat, before)


def test_adam_first_step_magnitude_is_lr():
    spec = small_spec()
    params = init_params(spec, 0, dtype=np.float64)
    g = np.full_like(params.flat, 0.7)
    adam = AdamState.for_params(params, lr=1e-3)
    before = params.flat.copy()
    adam_step(adam, params, g)
    step = before - params.flat
    assert np.allclose(step, 1e-3, rtol=1e-6)  # lr * sign(g)


def test_adam_deterministic_over_100_steps():
    spec = small_spec()

    def run():
        params = init_params(spec, 4, dtype=np.float64)
        adam = AdamState.for_params(params, lr=1e-3)
        rng = np.random.default_rng(9)
        for _ in range(100):
            adam_step(adam, params, rng.normal(size=params.flat.size))
        return params.flat

    assert np.array_equal(run(), run())


# ---------------------------------------------------------------- params/io


def test_paramset_roundtrip():
    spec = small_spec()
    params = init_params(spec, 12)
    assert params.flat.size == spec.n_params
    w = params.get("conv1_w").copy()
    params.set("conv1_w", w * 2)
    assert np.allclose(params.get("conv1_w"), w * 2)
    # untouched layers unchanged
    assert np.array_equal(
        init_params(spec, 12).get("head_w"), params.get("head_w")
    )


def test_netspec_validation():
    with pytest.raises(ConfigError):
        NetSpec(k=4, mode="other")
    with pytest.raises(ConfigError):
        NetSpec(k=4, mode=VALUES, kernel=4)


def test_checkpoint_roundtrip(tmp_path):
    spec_v = small_spec(VALUES)
    spec_p = small_spec(LOGITS)
    named = {"value": init_params(spec_v, 1), "policy": init_params(spec_p, 2)}
    save_checkpoint(tmp_path / "ck", named)
    loaded = load_checkpoint(tmp_path / "ck", {"value": spec_v, "policy": spec_p})
    for key in named:
        assert np.array_equal(loaded[key].flat, named[key].flat)
        assert loaded[key].dtype == named[key].dtype


def test_checkpoint_spec_mismatch_rejected(tmp_path):
    spec = small_spec(VALUES)
    save_checkpoint(tmp_path / "ck", {"value": init_params(spec, 1)})
    other = NetSpec(k=6, mode=VALUES, channels=3, n_conv=3)
    assert spec_hash(other) != spec_hash(spec)
    with pytest.raises(ConfigError):
        load_checkpoint(tmp_path / "ck", {"value": other})
