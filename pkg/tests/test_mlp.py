import numpy as np
import pytest
from conftest import gradient_error, numeric_gradient

from analogbits import mlp
from analogbits.errors import ConfigError


def base2_codebook(k, n_bits):
    rows = []
    for v in range(k):
        bits = [(v >> i) & 1 for i in range(n_bits)]
        rows.append(tuple(2.0 * b - 1.0 for b in bits))
    return tuple(rows)


def small_net(head=mlp.HEAD_LINEAR, seed=0):
    cfg = mlp.MlpConfig(
        n_features=4,
        hidden=(6, 5),
        n_time_features=4,
        head=head,
        positions=2,
        codebook=base2_codebook(4, 2) if head == mlp.HEAD_SOFTMAX else None,
    )
    net = mlp.MlpDenoiser.initialize(cfg, np.random.default_rng(seed))
    # nonzero final layer so gradients reach every parameter
    rng = np.random.default_rng(seed + 1)
    last = f"w{net.n_layers - 1}"
    net.params[last] = rng.standard_normal(net.params[last].shape) * 0.3
    net.params[last.replace('w', 'b')] = rng.standard_normal(
        net.params[last.replace('w', 'b')].shape) * 0.1
    return net


def test_time_features_layout():
    feats = mlp.time_features(0.0, 8, batch=3)
    assert feats.shape == (3, 8)
    np.testing.assert_allclose(feats[:, :4], 0.0, atol=1e-15)  # sin(0)
    np.testing.assert_allclose(feats[:, 4:], 1.0, atol=1e-15)  # cos(0)
    per_row = mlp.time_features(np.array([0.1, 0.7]), 8, batch=2)
    assert not np.allclose(per_row[0], per_row[1])


def test_zero_initialized_output():
    for head in (mlp.HEAD_LINEAR, mlp.HEAD_SOFTMAX):
        cfg = mlp.MlpConfig(n_features=4, hidden=(6,), n_time_features=4,
                            head=head, positions=2,
                            codebook=base2_codebook(4, 2) if head == mlp.HEAD_SOFTMAX else None)
        net = mlp.MlpDenoiser.initialize(cfg, np.random.default_rng(1))
        x = np.random.default_rng(2).standard_normal((3, 4))
        out = net.forward(x, np.zeros_like(x), 0.5)
        assert out.shape == (3, 4)
        # linear head: logits are zero; softmax head: uniform mix of a
        # complete base-2 codebook, whose mean is also the zero vector
        np.testing.assert_allclose(out, 0.0, atol=1e-15)


def test_softmax_head_outputs_codebook_mixtures():
    net = small_net(mlp.HEAD_SOFTMAX)
    x = np.random.default_rng(3).standard_normal((10, 4))
    out = net.forward(x, np.zeros_like(x), 0.3)
    # every position output must lie in the convex hull of codewords,
    # which for the full +-1 codebook is the box [-1, 1]
    assert np.all(out >= -1.0 - 1e-12) and np.all(out <= 1.0 + 1e-12)


def test_uniform_logits_give_codebook_mean():
    cb = ((1.0, 1.0), (1.0, -1.0), (-1.0, 3.0))
    cfg = mlp.MlpConfig(n_features=2, hidden=(4,), n_time_features=2,
                        head=mlp.HEAD_SOFTMAX, positions=1, codebook=cb)
    net = mlp.MlpDenoiser.initialize(cfg, np.random.default_rng(0))
    # zero final layer -> uniform probabilities -> plain codeword average
    out = net.forward(np.zeros((1, 2)), np.zeros((1, 2)), 0.5)
    np.testing.assert_allclose(out, np.mean(cb, axis=0)[None, :], atol=1e-14)


@pytest.mark.parametrize("head", [mlp.HEAD_LINEAR, mlp.HEAD_SOFTMAX])
def test_backward_matches_finite_differences(head):
    net = small_net(head)
    rng = np.random.default_rng(7)
    x = rng.standard_normal((3, 4))
    cond = rng.standard_normal((3, 4))
    t = rng.uniform(0.0, 1.0, 3)
    d_out = rng.standard_normal((3, 4))

    out, cache = net.forward(x, cond, t, want_cache=True)
    analytic = net.backward(cache, d_out)
    numeric = numeric_gradient(
        lambda: float(np.sum(d_out * net.forward(x, cond, t))), net.params)
    assert gradient_error(analytic, numeric) < 1e-4


def test_gradient_through_condition_free_inputs_only():
    # backward covers parameters; inputs are not differentiated, so the
    # returned keys must exactly mirror the parameter dict
    net = small_net()
    x = np.random.default_rng(8).standard_normal((2, 4))
    out, cache = net.forward(x, np.zeros_like(x), 0.5, want_cache=True)
    grads = net.backward(cache, np.ones_like(out))
    assert set(grads) == set(net.params)
    for key in grads:
        assert grads[key].shape == net.params[key].shape


def test_output_map_identity_and_sigmoid():
    cfg = mlp.MlpConfig(n_features=2, hidden=(4,), output_map=mlp.MAP_SIGMOID,
                        scale=2.0, n_time_features=4)
    net = mlp.MlpDenoiser.initialize(cfg, np.random.default_rng(0))
    raw = np.array([[0.0, 40.0], [-40.0, 0.0]])
    mapped = net.apply_output_map(raw)
    np.testing.assert_allclose(mapped, [[0.0, 2.0], [-2.0, 0.0]], atol=1e-12)

    ident = mlp.MlpDenoiser.initialize(
        mlp.MlpConfig(n_features=2, hidden=(4,), n_time_features=4),
        np.random.default_rng(0))
    assert np.array_equal(ident.apply_output_map(raw), raw)


def test_output_map_softmax_mixes_levels():
    cfg = mlp.MlpConfig(n_features=3, hidden=(4,), output_map=mlp.MAP_SOFTMAX,
                        scale=1.0, positions=1, n_time_features=4)
    net = mlp.MlpDenoiser.initialize(cfg, np.random.default_rng(0))
    flat = net.apply_output_map(np.zeros((1, 3)))
    np.testing.assert_allclose(flat, (2.0 / 3.0) - 1.0, atol=1e-14)
    peaked = net.apply_output_map(np.array([[80.0, 0.0, 0.0]]))
    np.testing.assert_allclose(peaked, [[1.0, -1.0, -1.0]], atol=1e-12)


def test_predict_is_forward_plus_map():
    net = small_net()
    x = np.random.default_rng(9).standard_normal((4, 4))
    cond = np.zeros_like(x)
    assert np.array_equal(net.predict(x, cond, 0.2),
                          net.apply_output_map(net.forward(x, cond, 0.2)))


def test_shape_validation():
    net = small_net()
    x = np.zeros((2, 4))
    with pytest.raises(ValueError):
        net.forward(x, np.zeros((2, 3)), 0.5)


def test_config_validation():
    with pytest.raises(ConfigError):
        mlp.MlpConfig(n_features=4, head="conv")
    with pytest.raises(ConfigError):
        mlp.MlpConfig(n_features=4, n_time_features=3)
    with pytest.raises(ConfigError):
        mlp.MlpConfig(n_features=4, positions=3)
    with pytest.raises(ConfigError):
        mlp.MlpConfig(n_features=4, head=mlp.HEAD_SOFTMAX)  # no codebook
    with pytest.raises(ConfigError):
        mlp.MlpConfig(n_features=4, codebook=((1.0,),))  # codebook w/o head
    with pytest.raises(ConfigError):
        mlp.MlpConfig(n_features=4, head=mlp.HEAD_SOFTMAX, positions=2,
                      codebook=((1.0, 1.0, 1.0),))  # wrong width
    with pytest.raises(ConfigError):
        mlp.MlpConfig(n_features=4, head=mlp.HEAD_SOFTMAX, positions=2,
                      codebook=base2_codebook(4, 2), output_map=mlp.MAP_SIGMOID)


def test_param_shape_validation():
    cfg = mlp.MlpConfig(n_features=4, hidden=(6,), n_time_features=4)
    params = mlp.init_params(cfg, np.random.default_rng(0))
    params["w0"] = params["w0"][:, :-1]
    with pytest.raises(ConfigError):
        mlp.MlpDenoiser(cfg, params)


def test_deterministic_init():
    cfg = mlp.MlpConfig(n_features=4, hidden=(6, 5), n_time_features=4)
    a = mlp.init_params(cfg, np.random.default_rng(123))
    b = mlp.init_params(cfg, np.random.default_rng(123))
    assert all(np.array_equal(a[k], b[k]) for k in a)
