import numpy as np
import pytest

import isomer

CFG = {"heads": 2, "ffn_ratio": 2, "context_reduction": 2, "merge_ratio": "1/2"}


def tokens(n=9, c=8, seed=0):
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, c))


def test_softmax_rows_sum_to_one():
    y = isomer.softmax(tokens(), 1)
    np.testing.assert_allclose(y.sum(axis=1), 1.0, rtol=0, atol=1e-14)


def test_layernorm_matches_numpy():
    x = tokens()
    gamma = np.ones(8)
    beta = np.zeros(8)
    mu = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    expected = (x - mu) / np.sqrt(var + 1e-5)
    np.testing.assert_allclose(isomer.layernorm(x, gamma, beta, 1), expected, atol=1e-12)


@pytest.mark.parametrize("kind", isomer.BLOCK_KINDS)
def test_block_forward_shape_and_determinism(kind):
    x = tokens()
    params = isomer.init_block_params(kind, {**CFG, "tokens": 9, "channels": 8}, seed=3)
    y1 = isomer.block_forward(kind, x, params, CFG)
    y2 = isomer.block_forward(kind, x, params, CFG)
    assert y1.shape == x.shape
    assert np.isfinite(y1).all()
    assert np.array_equal(y1, y2)


def test_cst_global_context_is_shared_across_tokens():
    x = tokens()
    params = isomer.init_block_params("cst", {**CFG, "tokens": 9, "channels": 8}, seed=4)
    g = isomer.cst_weight_map(x, params)
    assert g.shape == (9,)
    assert g.sum() == pytest.approx(1.0, abs=1e-14)
    # Every token receives the same addend; subtracting x back loses at most
    # one rounding per element.
    delta = isomer.cst_global_context(x, params) - x
    np.testing.assert_allclose(delta, np.broadcast_to(delta[0], delta.shape), rtol=0, atol=1e-15)


def test_vanilla_backward_matches_finite_difference():
    x = tokens(n=4)
    cfg = {**CFG, "tokens": 4, "channels": 8}
    params = isomer.init_block_params("vt", cfg, seed=5)
    r = np.random.default_rng(1).uniform(-1.0, 1.0, size=x.shape)
    dx, grads = isomer.block_backward("vt", x, params, r, cfg)
    assert set(grads) == set(params)
    h = 1e-5
    for i, j in [(0, 0), (2, 5), (3, 7)]:
        xp, xm = x.copy(), x.copy()
        xp[i, j] += h
        xm[i, j] -= h
        num = ((isomer.block_forward("vt", xp, params, cfg) - isomer.block_forward("vt", xm, params, cfg)) * r).sum() / (2 * h)
        assert dx[i, j] == pytest.approx(num, rel=1e-6, abs=1e-9)


def test_sgst_cost_reduction():
    vt = isomer.block_cost("vt", {"tokens": 1024, "channels": 256})
    sg = isomer.block_cost("sgst", {"tokens": 1024, "channels": 256, "merge_ratio": "1/9"})
    assert sg["merged"] == 114
    assert 0.10 <= sg["attention_portion"] / vt["attention_portion"] <= 0.16
    assert sg["mhsa_portion"] / vt["mhsa_portion"] == pytest.approx(0.3524, abs=1e-3)
    assert vt["total"] > sg["total"]


def test_bad_config_raises_value_error():
    with pytest.raises(ValueError):
        isomer.block_config({"channels": 8, "heads": 3})


def test_verify_suite_from_python():
    reports = isomer.run_suite("gather")
    assert [r["name"] for r in reports] == ["gather.partition_and_identity"]
    assert reports[0]["pass"]


def test_tiny_training_is_deterministic():
    a = isomer.train({"steps": 5}, tiny=True)
    b = isomer.train({"steps": 5}, tiny=True)
    assert len(a["loss"]) == 5
    assert a["loss"] == b["loss"]
    for name, value in a["params"].items():
        assert np.array_equal(value, b["params"][name])


def test_cli_in_process(tmp_path):
    status, out, _ = isomer.run_cli(["--out-dir", tmp_path, "cost", "--tokens", "256", "--channels", "64"])
    assert status == 0
    assert (tmp_path / "manifest.json").exists()
    status, _, err = isomer.run_cli(["verify", "--suite", "nope"])
    assert status == 2
    assert "unknown suite" in err
