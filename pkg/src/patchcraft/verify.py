"""Monte Carlo and exact combinatorial checks of the statistical claims.

Covers the bias and variance of the noisy patch-distance estimator, the
normalized squared-autocovariance sum rho and its closed-form lower bound for
bilinear-decay noise, the Toeplitz double-sum identity, and the location,
shift and Gaussianity of the input/residual covariance statistic under
independent, input-correlated and content-anticorrelated target noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from patchcraft.noise import bilinear_autocov, correlate, flat_kernel, sample_bilinear, sample_iid
from patchcraft.rng import Rng

__all__ = [
    "DeltaMCReport",
    "RhoReport",
    "SyrReport",
    "mc_delta",
    "mc_syr_scenarios",
    "rho_bound",
    "rho_exact",
    "rho_separable",
    "toeplitz_identity_check",
    "check_rho_equalities",
    "check_rho_bound",
    "check_lemma11",
    "check_delta",
    "check_syr",
]


# ---------------------------------------------------------------------------
# rho: normalized squared-autocovariance sum
# ---------------------------------------------------------------------------


def rho_exact(n: int, autocov, sigma: float) -> float:
    """Direct quadruple sum of (R(i1-j1, i2-j2)/sigma^2)^2 over indices 1..n.

    `autocov` is evaluated once per lag pair; the n^4 additions run over a
    lookup table of those values.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    taus = np.arange(-(n - 1), n)
    table = np.array([[autocov(t1, t2) for t2 in taus] for t1 in taus], dtype=np.float64)
    sq = (table / (sigma * sigma)) ** 2
    idx = np.arange(n)
    lags = (idx[:, None] - idx[None, :]).ravel() + (n - 1)  # n^2 flattened lag indices
    total = 0.0
    for chunk in np.array_split(lags, max(1, len(lags) // 2048)):
        total += float(sq[chunk[:, None], lags[None, :]].sum())
    return total / (n * n)


def rho_separable(n: int, g, sigma: float) -> float:
    """rho for a separable autocovariance R = g(t1)g(t2), reduced to O(n)
    via the Toeplitz double-sum identity."""
    taus = np.arange(-(n - 1), n)
    weights = 1.0 - np.abs(taus) / n
    gsq = np.array([g(t) ** 2 for t in taus], dtype=np.float64)
    inner = n * float(np.sum(weights * gsq))
    return inner * inner / (n * n * sigma ** 4)


def rho_bound(n: int, theta: float) -> float:
    """Closed-form lower bound (1/4)(r + 1/r)^2 with r = min(n, floor(theta))."""
    if n < 1 or theta < 1:
        raise ValueError("need n >= 1 and theta >= 1")
    r = min(n, math.floor(theta))
    return 0.25 * (r + 1.0 / r) ** 2


def rho_exact_bilinear(n: int, theta: float, sigma: float = 1.0) -> float:
    return rho_exact(n, lambda t1, t2: bilinear_autocov(t1, t2, theta, sigma), sigma)


@dataclass(frozen=True)
class RhoReport:
    n: int
    theta: float
    rho_exact: float
    rho_bound: float
    bound_satisfied: bool
    equality_gap: float


def rho_report(n: int, theta: float) -> RhoReport:
    exact = rho_exact_bilinear(n, theta)
    bound = rho_bound(n, theta)
    return RhoReport(n, theta, exact, bound, exact >= bound - 1e-9, exact - bound)


# ---------------------------------------------------------------------------
# Toeplitz double-sum identity
# ---------------------------------------------------------------------------


def toeplitz_identity_check(n: int, f) -> float:
    """|sum_{i,j} f(i-j) - n * sum_tau (1 - |tau|/n) f(tau)|."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lhs = 0.0
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            lhs += f(i - j)
    rhs = n * sum((1.0 - abs(t) / n) * f(t) for t in range(-(n - 1), n))
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Patch-distance estimator: bias and variance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaMCReport:
    n: int
    theta: int
    sigma_z: float
    trials: int
    delta_x: float
    bias_est: float
    bias_expected: float
    bias_se: float
    var_est: float
    var_bound: float
    var_se: float


def mc_delta(n: int, theta: int, sigma_z: float, clean_diff: np.ndarray,
             trials: int, rng: Rng, chunk: int = 20000) -> DeltaMCReport:
    """Monte Carlo distribution of the noisy squared distance delta_y.

    Per trial, two independent bilinear-decay noise fields are drawn (cropped
    from a larger circular field so the crop carries the exact plane
    autocovariance) and delta_y is the mean squared entry of
    clean_diff + z2 - z1.
    """
    if trials < 10_000:
        raise ValueError("need at least 10^4 trials")
    clean_diff = np.asarray(clean_diff, dtype=np.float64)
    if clean_diff.shape != (n, n):
        raise ValueError(f"clean_diff must be {n}x{n}")
    side = n + theta  # crop below the wrap-around correlation distance
    delta_x = float(np.mean(clean_diff ** 2))
    deltas = np.empty(trials)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        z1 = sample_bilinear((m, side, side), theta, sigma_z, rng)[:, :n, :n]
        z2 = sample_bilinear((m, side, side), theta, sigma_z, rng)[:, :n, :n]
        dy = clean_diff[None] + z2 - z1
        deltas[done : done + m] = np.mean(dy * dy, axis=(1, 2))
        done += m
    mean = float(deltas.mean())
    var_est = float(deltas.var(ddof=1))
    rho = rho_exact_bilinear(n, theta)
    dev_sq = (deltas - mean) ** 2
    return DeltaMCReport(
        n=n,
        theta=theta,
        sigma_z=sigma_z,
        trials=trials,
        delta_x=delta_x,
        bias_est=mean - delta_x,
        bias_expected=2.0 * sigma_z ** 2,
        bias_se=float(deltas.std(ddof=1) / math.sqrt(trials)),
        var_est=var_est,
        var_bound=8.0 / (n * n) * sigma_z ** 4 * rho,
        var_se=float(dev_sq.std(ddof=1) / math.sqrt(trials)),
    )


# ---------------------------------------------------------------------------
# s_{y,r} scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyrReport:
    scenario: str
    side: int
    sigma_z: float
    pairs: int
    mean: float
    mean_expected: float
    mean_se: float
    skewness: float
    excess_kurtosis: float


def _smooth_field(m: int, side: int, sigma: float, rng: Rng) -> np.ndarray:
    """Stationary short-range-dependent field: white noise through a 2x2 flat
    kernel (variance-preserving)."""
    return correlate(sample_iid((m, side, side), sigma, rng), flat_kernel(2))


def mc_syr_scenarios(scenario: str, side: int, sigma_z: float, pairs: int, rng: Rng,
                     sigma_x: float = 30.0, sigma_w: float = 20.0,
                     cov_zw: float = 30.0, cov_xw: float = -50.0,
                     chunk: int | None = None) -> SyrReport:
    """Moments of the input/residual covariance under a dependency scenario.

    independent: content x, input noise z and target noise w are mutually
    independent. type1 mixes z into w to hit cross-covariance cov_zw > 0;
    type2 mixes x into w to hit cov_xw < 0.
    """
    if pairs < 1000:
        raise ValueError("need at least 10^3 pairs")
    if scenario not in ("independent", "type1", "type2"):
        raise ValueError(f"unknown scenario {scenario!r}")
    if scenario == "type1":
        a = cov_zw / sigma_z ** 2
        resid_var = sigma_w ** 2 - a * a * sigma_z ** 2
        expected = cov_zw - sigma_z ** 2
    elif scenario == "type2":
        b = cov_xw / sigma_x ** 2
        resid_var = sigma_w ** 2 - b * b * sigma_x ** 2
        expected = cov_xw - sigma_z ** 2
    else:
        resid_var = sigma_w ** 2
        expected = -sigma_z ** 2
    if resid_var <= 0:
        raise ValueError("requested cross-covariance exceeds the target noise variance")

    if chunk is None:
        chunk = max(1, int(4_000_000 // (side * side)))
    stats = np.empty(pairs)
    done = 0
    while done < pairs:
        m = min(chunk, pairs - done)
        x = _smooth_field(m, side, sigma_x, rng)
        z = _smooth_field(m, side, sigma_z, rng)
        v = _smooth_field(m, side, math.sqrt(resid_var), rng)
        if scenario == "type1":
            w = a * z + v
        elif scenario == "type2":
            w = b * x + v
        else:
            w = v
        y = (x + z).reshape(m, -1)
        r = (w - z).reshape(m, -1)
        yc = y - y.mean(axis=1, keepdims=True)
        rc = r - r.mean(axis=1, keepdims=True)
        stats[done : done + m] = np.mean(yc * rc, axis=1)
        done += m

    centered = stats - stats.mean()
    m2 = float(np.mean(centered ** 2))
    m3 = float(np.mean(centered ** 3))
    m4 = float(np.mean(centered ** 4))
    return SyrReport(
        scenario=scenario,
        side=side,
        sigma_z=sigma_z,
        pairs=pairs,
        mean=float(stats.mean()),
        mean_expected=expected,
        mean_se=float(stats.std(ddof=1) / math.sqrt(pairs)),
        skewness=m3 / m2 ** 1.5,
        excess_kurtosis=m4 / (m2 * m2) - 3.0,
    )


# ---------------------------------------------------------------------------
# Named checks with pinned tolerances
# ---------------------------------------------------------------------------


def check_rho_equalities(n_max: int = 32) -> dict:
    """rho equals 1 at theta=1 and (1/4)(n + 1/n)^2 at theta=n, to 1e-9."""
    rows = []
    worst = 0.0
    for n in range(1, n_max + 1):
        gap1 = abs(rho_exact_bilinear(n, 1) - 1.0)
        gap_n = abs(rho_exact_bilinear(n, n) - 0.25 * (n + 1.0 / n) ** 2)
        worst = max(worst, gap1, gap_n)
        rows.append({"n": n, "gap_theta_1": gap1, "gap_theta_n": gap_n})
    return {"name": "rho_equalities", "passed": worst < 1e-9, "max_gap": worst, "rows": rows}


def check_rho_bound(n_max: int = 16, theta_max: int = 16) -> dict:
    """rho_exact >= rho_bound - 1e-9 over the (n, theta) grid."""
    rows = []
    min_margin = math.inf
    for n in range(1, n_max + 1):
        for theta in range(1, theta_max + 1):
            rep = rho_report(n, theta)
            min_margin = min(min_margin, rep.equality_gap)
            rows.append({"n": n, "theta": theta, "rho_exact": rep.rho_exact, "rho_bound": rep.rho_bound})
    return {"name": "rho_bound", "passed": min_margin >= -1e-9, "min_margin": min_margin, "rows": rows}


def check_lemma11(trials: int = 1000, n_max: int = 32, seed: int = 0) -> dict:
    """Toeplitz identity on random f over random n <= n_max; tolerance 1e-10."""
    rng = Rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, n_max + 1))
        values = rng.uniform(2 * n - 1) * 2.0 - 1.0
        disc = toeplitz_identity_check(n, lambda t: values[t + n - 1])
        worst = max(worst, disc)
    return {"name": "lemma11", "passed": worst < 1e-10, "max_discrepancy": worst,
            "rows": [{"trials": trials, "n_max": n_max, "max_discrepancy": worst}]}


def check_delta(seed: int = 0, trials: int = 100_000) -> dict:
    """Bias 2*sigma_z^2 within 3 SE and variance within 5% of the sharp bound
    for delta_x = 0 at theta in {1, 2, 4}; for random delta_x != 0 the
    variance stays above the bound minus 3 SE."""
    rng = Rng(seed)
    n, sigma = 8, 10.0
    rows = []
    passed = True
    for theta in (1, 2, 4):
        rep = mc_delta(n, theta, sigma, np.zeros((n, n)), trials, rng.child("zero", theta))
        bias_ok = abs(rep.bias_est - rep.bias_expected) <= 3.0 * rep.bias_se
        var_ok = abs(rep.var_est - rep.var_bound) <= 0.05 * rep.var_bound
        passed = passed and bias_ok and var_ok
        rows.append({"theta": theta, "delta_x": 0.0, "bias_est": rep.bias_est,
                     "bias_se": rep.bias_se, "var_est": rep.var_est,
                     "var_bound": rep.var_bound, "bias_ok": bias_ok, "var_ok": var_ok})
    diff = Rng(seed).child("clean_diff").normal((n, n), sigma=5.0)
    rep = mc_delta(n, 2, sigma, diff, trials, rng.child("nonzero"))
    bias_ok = abs(rep.bias_est - rep.bias_expected) <= 3.0 * rep.bias_se
    ineq_ok = rep.var_est >= rep.var_bound - 3.0 * rep.var_se
    passed = passed and bias_ok and ineq_ok
    rows.append({"theta": 2, "delta_x": rep.delta_x, "bias_est": rep.bias_est,
                 "bias_se": rep.bias_se, "var_est": rep.var_est,
                 "var_bound": rep.var_bound, "bias_ok": bias_ok, "var_ok": ineq_ok})
    return {"name": "delta", "passed": passed, "rows": rows}


def check_syr(seed: int = 0, pairs: int = 10_000, side: int = 256) -> dict:
    """Mean at the predicted location within 3 SE for all three scenarios;
    skewness below 0.1 and excess kurtosis below 0.2 for the independent one."""
    rng = Rng(seed)
    rows = []
    passed = True
    rep = mc_syr_scenarios("independent", side, 10.0, pairs, rng.child("independent"))
    mean_ok = abs(rep.mean - rep.mean_expected) <= 3.0 * rep.mean_se
    moments_ok = abs(rep.skewness) < 0.1 and abs(rep.excess_kurtosis) < 0.2
    passed = passed and mean_ok and moments_ok
    rows.append({"scenario": "independent", "side": side, "pairs": pairs, "mean": rep.mean,
                 "mean_expected": rep.mean_expected, "mean_se": rep.mean_se,
                 "skewness": rep.skewness, "excess_kurtosis": rep.excess_kurtosis,
                 "mean_ok": mean_ok, "moments_ok": moments_ok})
    for scenario in ("type1", "type2"):
        rep = mc_syr_scenarios(scenario, 64, 10.0, 3000, rng.child(scenario))
        mean_ok = abs(rep.mean - rep.mean_expected) <= 3.0 * rep.mean_se
        passed = passed and mean_ok
        rows.append({"scenario": scenario, "side": 64, "pairs": 3000, "mean": rep.mean,
                     "mean_expected": rep.mean_expected, "mean_se": rep.mean_se,
                     "skewness": rep.skewness, "excess_kurtosis": rep.excess_kurtosis,
                     "mean_ok": mean_ok, "moments_ok": True})
    return {"name": "syr", "passed": passed, "rows": rows}
