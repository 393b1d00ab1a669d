"""Miniature bias-free residual denoiser with analytic gradients.

Two 3x3 convolutions around a rectifier, no bias terms, and a residual skip:
out = input - conv2(relu(conv1(input))). Small enough that training runs in
seconds and every gradient can be cross-checked by finite differences, yet
nonlinear enough that the unbiased-gradient property of noisy-target training
is a nontrivial claim to verify.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from patchcraft.image import Image, psnr
from patchcraft.rng import Rng

__all__ = [
    "MiniDenoiser",
    "TrainConfig",
    "evaluate",
    "forward",
    "lemma1_check",
    "loss_and_grad",
    "sgd_train",
]


@dataclass
class MiniDenoiser:
    """Bias-free weights: w1 (filters, channels, 3, 3), w2 (channels, filters, 3, 3)."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        if self.w1.ndim != 4 or self.w1.shape[2:] != (3, 3):
            raise ValueError("w1 must be (filters, channels, 3, 3)")
        if self.w2.shape != (self.w1.shape[1], self.w1.shape[0], 3, 3):
            raise ValueError("w2 must be (channels, filters, 3, 3)")

    @property
    def channels(self) -> int:
        return self.w1.shape[1]

    @property
    def filters(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def zeros(cls, channels: int, filters: int) -> "MiniDenoiser":
        return cls(np.zeros((filters, channels, 3, 3)), np.zeros((channels, filters, 3, 3)))

    @classmethod
    def random(cls, channels: int, filters: int, rng: Rng, scale: float = 0.05) -> "MiniDenoiser":
        return cls(
            rng.normal((filters, channels, 3, 3), sigma=scale),
            rng.normal((channels, filters, 3, 3), sigma=scale),
        )

    def copy(self) -> "MiniDenoiser":
        return MiniDenoiser(self.w1.copy(), self.w2.copy())


def _reflect_index(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("convolution input must be at least 2 pixels per side")
    return np.concatenate([[1], np.arange(n), [n - 2]])


def _pad_windows(x: np.ndarray) -> np.ndarray:
    """Mirror-pad by 1 and expose all 3x3 windows: (C, H, W, 3, 3)."""
    hm = _reflect_index(x.shape[1])
    wm = _reflect_index(x.shape[2])
    padded = x[:, hm[:, None], wm[None, :]]
    return sliding_window_view(padded, (3, 3), axis=(1, 2))


def _conv3x3(windows: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.einsum("chwij,ocij->ohw", windows, weights)


def _conv3x3_input_grad(dy: np.ndarray, weights: np.ndarray, shape) -> np.ndarray:
    """Gradient wrt the convolution input, folding padded positions back
    through the mirror map."""
    c, h, w = shape
    dpad = np.zeros((c, h + 2, w + 2))
    for i in range(3):
        for j in range(3):
            dpad[:, i : i + h, j : j + w] += np.einsum("ohw,oc->chw", dy, weights[:, :, i, j])
    hm = _reflect_index(h)
    wm = _reflect_index(w)
    dx = np.zeros((c, h, w))
    np.add.at(dx, (np.arange(c)[:, None, None], hm[None, :, None], wm[None, None, :]), dpad)
    return dx


def _forward_cached(model: MiniDenoiser, y: np.ndarray):
    win_y = _pad_windows(y)
    pre = _conv3x3(win_y, model.w1)
    hidden = np.maximum(pre, 0.0)
    win_h = _pad_windows(hidden)
    out = y - _conv3x3(win_h, model.w2)
    return out, (win_y, pre > 0, win_h)


def forward(model: MiniDenoiser, img: Image) -> Image:
    """Residual-skip reconstruction; output shape equals input shape."""
    if img.channels != model.channels:
        raise ValueError(f"model expects {model.channels} channels, image has {img.channels}")
    out, _ = _forward_cached(model, img.data)
    return Image(out)


def _param_grad(model: MiniDenoiser, cache, upstream: np.ndarray):
    """Gradient of <f(y), upstream> wrt the weights (Jacobian-transpose apply)."""
    win_y, mask, win_h = cache
    d_res = -upstream
    g2 = np.einsum("chw,fhwij->cfij", d_res, win_h)
    dh = _conv3x3_input_grad(d_res, model.w2, (model.filters,) + upstream.shape[1:])
    dpre = dh * mask
    g1 = np.einsum("fhw,chwij->fcij", dpre, win_y)
    return g1, g2


def loss_and_grad(model: MiniDenoiser, y: np.ndarray, target: np.ndarray):
    """Half squared error of f(y) against target, with analytic weight grads."""
    y = np.asarray(y, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if y.shape != target.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {target.shape}")
    out, cache = _forward_cached(model, y)
    err = out - target
    loss = 0.5 * float(np.sum(err * err))
    g1, g2 = _param_grad(model, cache, err)
    return loss, (g1, g2)


def lemma1_check(model: MiniDenoiser, x: Image, z: np.ndarray, draws: int,
                 w_sigma: float, rng: Rng, w_mean: float = 0.0) -> dict:
    """Compare the w-averaged noisy-target gradient with the supervised one.

    For the fixed pair (x, z) the noisy-target gradient decomposes as the
    supervised gradient minus the Jacobian-transpose applied to the target
    noise draw, so the average over independent zero-mean draws converges to
    the supervised gradient at CLT rate. Reports the largest per-parameter
    standardized deviation; a nonzero w_mean is the deliberate violation case.
    """
    y = x.data + z
    out, cache = _forward_cached(model, y)
    err_sup = out - x.data
    sup1, sup2 = _param_grad(model, cache, err_sup)

    sum1 = np.zeros_like(sup1)
    sum2 = np.zeros_like(sup2)
    sq1 = np.zeros_like(sup1)
    sq2 = np.zeros_like(sup2)
    for _ in range(draws):
        w = rng.normal(y.shape, sigma=w_sigma) + w_mean
        # gradient of the noisy-target loss = supervised gradient - J^T w
        j1, j2 = _param_grad(model, cache, w)
        g1 = sup1 - j1
        g2 = sup2 - j2
        sum1 += g1
        sum2 += g2
        sq1 += g1 * g1
        sq2 += g2 * g2

    def _standardized(total, total_sq, ref):
        mean = total / draws
        var = np.maximum(total_sq / draws - mean * mean, 0.0)
        se = np.sqrt(var / draws)
        dev = np.abs(mean - ref)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(se > 0, dev / se, np.where(dev > 0, np.inf, 0.0))
        return mean, score

    mean1, score1 = _standardized(sum1, sq1, sup1)
    mean2, score2 = _standardized(sum2, sq2, sup2)
    max_score = float(max(score1.max(), score2.max()))
    return {
        "draws": draws,
        "w_sigma": w_sigma,
        "w_mean": w_mean,
        "max_standardized_deviation": max_score,
        "max_abs_deviation": float(max(np.abs(mean1 - sup1).max(), np.abs(mean2 - sup2).max())),
    }


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    lr: float = 0.5
    halve_every: int = 5
    batch: int = 16
    crop: int = 50
    seed: int = 0
    filters: int = 8

    def __post_init__(self):
        if min(self.epochs, self.halve_every, self.batch, self.crop, self.filters) < 1 or self.lr <= 0:
            raise ValueError("all training parameters must be positive")


def _random_crop(arr: np.ndarray, crop: int, rng: Rng):
    h, w = arr.shape[1:]
    ch = min(crop, h)
    cw = min(crop, w)
    r = int(rng.integers(0, h - ch + 1))
    c = int(rng.integers(0, w - cw + 1))
    return (slice(None), slice(r, r + ch), slice(c, c + cw))


def sgd_train(pairs, config: TrainConfig, init: MiniDenoiser | None = None):
    """Plain SGD on random crops of (input, target) pairs.

    `pairs` is a list of (noisy, target) float arrays shaped (C, H, W) at
    0-255 scale; they are divided by 255 internally for conditioning, which
    leaves the learned function unchanged at native scale because the
    bias-free network is positively homogeneous. The learning rate halves
    every `halve_every` epochs; gradients are normalized per sample so the
    rate is insensitive to crop size. Returns the trained model and the
    per-epoch mean loss trace (normalized units). Deterministic per seed.
    """
    pairs = [
        (np.asarray(a, dtype=np.float64) / 255.0, np.asarray(b, dtype=np.float64) / 255.0)
        for a, b in pairs
    ]
    if not pairs:
        raise ValueError("empty training set")
    channels = pairs[0][0].shape[0]
    rng = Rng(config.seed)
    model = init.copy() if init is not None else MiniDenoiser.random(channels, config.filters, rng.child("init"))
    losses = []
    for epoch in range(config.epochs):
        lr = config.lr * 0.5 ** (epoch // config.halve_every)
        erng = rng.child("epoch", epoch)
        order = [int(i) for i in erng.integers(0, len(pairs), len(pairs))]
        epoch_loss = 0.0
        samples = 0
        for start in range(0, len(order), config.batch):
            batch = order[start : start + config.batch]
            g1 = np.zeros_like(model.w1)
            g2 = np.zeros_like(model.w2)
            batch_px = 0
            for idx in batch:
                noisy, target = pairs[idx]
                sl = _random_crop(noisy, config.crop, erng)
                loss, (d1, d2) = loss_and_grad(model, noisy[sl], target[sl])
                npx = noisy[sl].size
                g1 += d1
                g2 += d2
                batch_px += npx
                epoch_loss += loss
                samples += npx
            model.w1 -= lr * g1 / batch_px
            model.w2 -= lr * g2 / batch_px
        losses.append(epoch_loss / samples)
    return model, losses


def evaluate(model: MiniDenoiser, pairs) -> dict:
    """Mean PSNR of noisy and denoised images against clean ground truth.

    `pairs` is a list of (noisy, clean) Image pairs.
    """
    rows = []
    for noisy, clean in pairs:
        before = psnr(noisy, clean)
        after = psnr(forward(model, noisy), clean)
        rows.append({"before_db": before, "after_db": after})
    before = sum(r["before_db"] for r in rows) / len(rows)
    after = sum(r["after_db"] for r in rows) / len(rows)
    return {"mean_before_db": before, "mean_after_db": after, "gain_db": after - before, "rows": rows}
