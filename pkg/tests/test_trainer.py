import numpy as np
import pytest

from helpers import desk_set
from patchcraft import mini
from patchcraft.image import Image
from patchcraft.rng import Rng


def _fd_max_rel_err(model, y, t, eps=1e-4):
    _, (g1, g2) = mini.loss_and_grad(model, y, t)
    worst = 0.0
    for w, g in ((model.w1, g1), (model.w2, g2)):
        it = np.nditer(w, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            orig = w[i]
            w[i] = orig + eps
            lp, _ = mini.loss_and_grad(model, y, t)
            w[i] = orig - eps
            lm, _ = mini.loss_and_grad(model, y, t)
            w[i] = orig
            num = (lp - lm) / (2 * eps)
            worst = max(worst, abs(num - g[i]) / max(abs(num), abs(g[i]), 1e-8))
    return worst


def test_zero_model_is_identity():
    model = mini.MiniDenoiser.zeros(1, 4)
    img = Image(Rng(1).uniform((1, 9, 9)) * 255)
    out = mini.forward(model, img)
    assert np.array_equal(out.data, img.data)


def test_forward_channel_mismatch():
    model = mini.MiniDenoiser.zeros(3, 4)
    with pytest.raises(ValueError):
        mini.forward(model, Image(np.zeros((1, 5, 5))))


def test_weight_shape_validation():
    with pytest.raises(ValueError):
        mini.MiniDenoiser(np.zeros((4, 1, 5, 5)), np.zeros((1, 4, 5, 5)))
    with pytest.raises(ValueError):
        mini.MiniDenoiser(np.zeros((4, 1, 3, 3)), np.zeros((3, 4, 3, 3)))


def test_forward_matches_loop_convolution_oracle():
    rng = Rng(2)
    model = mini.MiniDenoiser.random(1, 3, rng.child("m"))
    y = rng.child("y").uniform((1, 6, 7))
    h, w = y.shape[1:]
    reflect = lambda i, n: abs(i) if i < n else 2 * n - 2 - i

    def conv(x, weights):
        out_c, in_c = weights.shape[:2]
        out = np.zeros((out_c, h, w))
        for o in range(out_c):
            for c in range(in_c):
                for r in range(h):
                    for cc in range(w):
                        acc = 0.0
                        for dr in range(3):
                            for dc in range(3):
                                rr = reflect(r + dr - 1, h)
                                c2 = reflect(cc + dc - 1, w)
                                acc += weights[o, c, dr, dc] * x[c, rr, c2]
                        out[o, r, cc] += acc
        return out

    want = y - conv(np.maximum(conv(y, model.w1), 0.0), model.w2)
    got = mini.forward(model, Image(y)).data
    assert np.max(np.abs(got - want)) < 1e-10


def test_scale_equivariance_with_positive_preactivations():
    rng = Rng(3)
    model = mini.MiniDenoiser.random(1, 4, rng.child("m"))
    model.w1[:] = np.abs(model.w1)  # positive weights + positive input
    y = Image(rng.child("y").uniform((1, 8, 8)) * 0.5 + 0.5)
    out1 = mini.forward(model, y).data
    out3 = mini.forward(model, Image(3.0 * y.data)).data
    assert np.max(np.abs(out3 - 3.0 * out1)) < 1e-8


def test_loss_zero_at_optimum():
    rng = Rng(4)
    model = mini.MiniDenoiser.random(1, 3, rng.child("m"))
    y = rng.child("y").uniform((1, 6, 6))
    out = mini.forward(model, Image(y)).data
    loss, (g1, g2) = mini.loss_and_grad(model, y, out)
    assert loss == 0.0
    assert np.all(g1 == 0.0) and np.all(g2 == 0.0)


def test_finite_difference_gradients():
    rng = Rng(5)
    worst = 0.0
    for trial in range(5):
        r = rng.child(trial)
        model = mini.MiniDenoiser.random(1, 2, r.child("m"), scale=0.2)
        model.w1[:] = np.abs(model.w1) + 0.05  # keep relu away from its kink
        y = r.child("y").uniform((1, 6, 6)) * 0.5 + 0.5
        t = r.child("t").uniform((1, 6, 6))
        worst = max(worst, _fd_max_rel_err(model, y, t))
    assert worst < 1e-5


def test_selfsupervised_gradient_identity():
    # gradient against a perturbed target differs from the clean-target
    # gradient exactly by the Jacobian-transpose applied to the perturbation
    rng = Rng(6)
    model = mini.MiniDenoiser.random(1, 4, rng.child("m"))
    y = rng.child("y").uniform((1, 8, 8)) * 255
    x = rng.child("x").uniform((1, 8, 8)) * 255
    w = rng.child("w").normal((1, 8, 8), sigma=25.0)
    _, (s1, s2) = mini.loss_and_grad(model, y, x)
    _, (n1, n2) = mini.loss_and_grad(model, y, x + w)
    out, cache = mini._forward_cached(model, y)
    j1, j2 = mini._param_grad(model, cache, w)
    assert np.max(np.abs((s1 - j1) - n1)) < 1e-9
    assert np.max(np.abs((s2 - j2) - n2)) < 1e-9


def test_lemma1_unbiased_and_control():
    rng = Rng(7)
    model = mini.MiniDenoiser.random(1, 3, rng.child("m"))
    x = Image(rng.child("x").uniform((1, 10, 10)) * 255)
    z = rng.child("z").normal(x.data.shape, sigma=10.0)
    rep = mini.lemma1_check(model, x, z, 3000, 25.0, rng.child("w"))
    assert rep["max_standardized_deviation"] < 4.0
    bad = mini.lemma1_check(model, x, z, 3000, 25.0, rng.child("w2"), w_mean=5.0)
    assert bad["max_standardized_deviation"] > 4.0


def test_lemma1_zero_noise_exact():
    rng = Rng(8)
    model = mini.MiniDenoiser.random(1, 3, rng.child("m"))
    x = Image(rng.child("x").uniform((1, 8, 8)))
    z = rng.child("z").normal(x.data.shape, sigma=5.0)
    rep = mini.lemma1_check(model, x, z, 50, 0.0, rng.child("w"))
    # zero w-draws leave only supervised terms; averaging costs a few ulps
    assert rep["max_abs_deviation"] < 1e-10


def test_sgd_train_determinism_and_descent():
    pairs = []
    for clean, burst in desk_set(9, count=10, side=64):
        pairs.append((burst.input_frame.data, clean.data))
    cfg = mini.TrainConfig(epochs=20, lr=5.0, batch=2, crop=40, seed=3, filters=8, halve_every=5)
    m1, l1 = mini.sgd_train(pairs, cfg)
    m2, l2 = mini.sgd_train(pairs, cfg)
    assert np.array_equal(m1.w1, m2.w1) and np.array_equal(m1.w2, m2.w2)
    assert l1 == l2
    assert l1[-1] < l1[0]


def test_sgd_train_zero_noise_stays_identity():
    rng = Rng(10)
    imgs = [rng.child(i).uniform((1, 40, 40)) * 255 for i in range(4)]
    pairs = [(im, im) for im in imgs]
    init = mini.MiniDenoiser.zeros(1, 4)
    cfg = mini.TrainConfig(epochs=3, lr=1.0, batch=2, crop=30, seed=0, filters=4)
    model, losses = mini.sgd_train(pairs, cfg, init=init)
    assert losses[0] == 0.0
    assert np.max(np.abs(model.w1)) == 0.0 and np.max(np.abs(model.w2)) == 0.0
    with pytest.raises(ValueError):
        mini.sgd_train([], cfg)


def test_evaluate_identity_model():
    rng = Rng(11)
    noisy = Image(rng.child("n").uniform((1, 16, 16)) * 255)
    clean = Image(rng.child("c").uniform((1, 16, 16)) * 255)
    rep = mini.evaluate(mini.MiniDenoiser.zeros(1, 2), [(noisy, clean)])
    assert rep["mean_after_db"] == rep["mean_before_db"]
    assert rep["gain_db"] == 0.0
