import numpy as np
import pytest

from scramwatch.autoencoder import Architecture, Autoencoder
from scramwatch.errors import ConfigError, DataError

from conftest import tiny_architecture


def test_architecture_defaults_and_desk_scale():
    full = Architecture()
    assert full.encoder_units == (256, 128)
    assert full.bottleneck == 32
    assert full.decoder_units == (128, 128)
    assert full.window == 10 and full.features == 9
    desk = Architecture.desk_scale()
    assert desk.encoder_units == (64, 32)
    assert desk.bottleneck == 16
    assert desk.decoder_units == (32, 32)
    desk.validate()


def test_architecture_validation():
    with pytest.raises(ConfigError):
        Architecture(window=0).validate()
    with pytest.raises(ConfigError):
        Architecture(bottleneck=0).validate()
    with pytest.raises(ConfigError):
        Architecture(encoder_dropout=1.5).validate()


def test_architecture_dict_round_trip():
    a = tiny_architecture()
    assert Architecture.from_dict(a.to_dict()) == a


def test_forward_shape_and_2d_promotion():
    model = Autoencoder(tiny_architecture(window=7), seed=0)
    batch = np.random.default_rng(0).random((4, 7, 9))
    out = model.forward(batch)
    assert out.shape == (4, 7, 9)
    single = model.forward(batch[0])
    np.testing.assert_allclose(single[0], out[0], atol=1e-12)


def test_forward_rejects_wrong_shape():
    model = Autoencoder(tiny_architecture(window=7), seed=0)
    with pytest.raises(DataError, match="shape"):
        model.forward(np.zeros((2, 6, 9)))
    with pytest.raises(DataError):
        model.forward(np.zeros((2, 7, 8)))


def test_inference_is_deterministic_training_is_not():
    model = Autoencoder(tiny_architecture(), seed=1)
    x = np.random.default_rng(2).random((3, 6, 9))
    np.testing.assert_array_equal(model.forward(x), model.forward(x))
    a = model.forward(x, rng=np.random.default_rng(5))
    b = model.forward(x, rng=np.random.default_rng(6))
    assert not np.array_equal(a, b)


def test_same_seed_same_parameters():
    a = Autoencoder(tiny_architecture(), seed=9)
    b = Autoencoder(tiny_architecture(), seed=9)
    for (name_a, pa), (name_b, pb) in zip(a.named_params(), b.named_params()):
        assert name_a == name_b
        np.testing.assert_array_equal(pa, pb)
    c = Autoencoder(tiny_architecture(), seed=10)
    assert not np.array_equal(a.enc1.Wx, c.enc1.Wx)


def test_named_params_unique_and_stable():
    model = Autoencoder(tiny_architecture(), seed=0)
    names = [n for n, _ in model.named_params()]
    assert len(names) == len(set(names))
    assert names[0] == "enc1.Wx"
    assert names[-1] == "head.b"
    assert names == [n for n, _ in model.named_grads()]


def test_set_param_validates():
    model = Autoencoder(tiny_architecture(), seed=0)
    good = np.ones_like(model.latent.W)
    model.set_param("latent.W", good)
    np.testing.assert_array_equal(model.latent.W, 1.0)
    with pytest.raises(DataError):
        model.set_param("latent.W", np.ones((1, 1)))
    with pytest.raises(DataError):
        model.set_param("nosuch.W", good)


def test_duplicated_batch_gives_identical_gradients():
    # mean-reduction: averaging over a doubled batch changes nothing
    model = Autoencoder(tiny_architecture(), seed=3)
    x = np.random.default_rng(4).random((2, 6, 9))
    model.loss_and_grad(x)
    single = {n: g.copy() for n, g in model.named_grads()}
    doubled = np.concatenate([x, x], axis=0)
    model.loss_and_grad(doubled)
    for n, g in model.named_grads():
        np.testing.assert_allclose(g, single[n], atol=1e-12)


def test_loss_value_is_batch_mean_mse():
    model = Autoencoder(tiny_architecture(), seed=5)
    x = np.random.default_rng(6).random((3, 6, 9))
    loss = model.loss_and_grad(x)
    recon = model.forward(x)
    assert loss == pytest.approx(float(np.mean((recon - x) ** 2)), rel=1e-12)


def test_full_model_gradients_match_finite_differences():
    arch = Architecture(window=4, features=3, encoder_units=(4, 3), bottleneck=2,
                        decoder_units=(3, 3))
    model = Autoencoder(arch, seed=7)
    x = np.random.default_rng(8).random((2, 4, 3))
    model.loss_and_grad(x)
    analytic = {n: g.copy() for n, g in model.named_grads()}

    h = 1e-6
    for name, param in model.named_params():
        fd = np.zeros_like(param)
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = param[idx]
            param[idx] = orig + h
            recon = model.forward(x)
            up = float(np.mean((recon - x) ** 2))
            param[idx] = orig - h
            recon = model.forward(x)
            down = float(np.mean((recon - x) ** 2))
            param[idx] = orig
            fd[idx] = (up - down) / (2 * h)
        scale = max(np.max(np.abs(fd)), 1e-8)
        err = np.max(np.abs(analytic[name] - fd)) / scale
        assert err < 1e-5, f"{name}: rel err {err:.2e}"


def test_reconstruct_chunking_matches_single_pass():
    model = Autoencoder(tiny_architecture(), seed=11)
    x = np.random.default_rng(12).random((30, 6, 9))
    np.testing.assert_allclose(model.reconstruct(x, chunk=7), model.reconstruct(x),
                               atol=1e-14)


def test_evaluate_matches_manual_mse():
    model = Autoencoder(tiny_architecture(), seed=13)
    x = np.random.default_rng(14).random((5, 6, 9))
    manual = float(np.mean((model.forward(x) - x) ** 2))
    assert model.evaluate(x) == pytest.approx(manual, rel=1e-12)
