"""Gaussian local-oscillator noise model and its second-order statistics.

The LO frequency fluctuation is a stationary zero-mean Gaussian process with
autocovariance

    R(t) = alpha * exp(-gamma |t|) + beta * delta(t)

(Ornstein-Uhlenbeck plus white frequency noise, angular units).  Everything
downstream needs only block integrals of R:

* ``G[i, j]``  covariance of the Ramsey phases ``theta_i = int ω dt`` over
  consecutive interrogation windows of length T,
* ``H[i]``     covariance of ``theta_i`` with the normalized two-window
  frequency difference ``w`` whose variance defines the Allan variance at
  averaging time ``tau = k T``,
* ``sigma2_lo(tau)``  the fractional Allan variance of the free-running LO.

The delta part of R is never discretized; it enters each closed form exactly
(``beta * T`` on G's diagonal, ``±beta/k`` in H).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

__all__ = [
    "NoiseParams",
    "KernelSet",
    "autocorrelation",
    "block_kernel",
    "cross_kernel",
    "free_lo_avar",
    "kernel_set",
    "sample_joint",
    "gen_trace",
]


@dataclass(frozen=True)
class NoiseParams:
    """LO noise parameters.

    alpha : OU variance, (rad/s)^2
    beta  : white-noise intensity, (rad/s)^2 * s
    gamma : OU decay rate, 1/s
    omega0: carrier angular frequency, rad/s
    """

    alpha: float
    beta: float
    gamma: float
    omega0: float

    def __post_init__(self) -> None:
        if not (self.alpha >= 0.0):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not (self.beta >= 0.0):
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not (self.gamma > 0.0):
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not (self.omega0 > 0.0):
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")


@dataclass(frozen=True)
class KernelSet:
    """Precomputed second-order statistics for k steps of length T.

    G is (K, K) with K = 2k - 1, H has length K, sigma2_lo is the fractional
    free-LO Allan variance at tau = k T and w_var = 2 omega0^2 sigma2_lo is
    the variance of the two-window frequency difference w.
    """

    params: NoiseParams
    T: float
    k: int
    K: int
    G: np.ndarray
    H: np.ndarray
    sigma2_lo: float
    w_var: float


def autocorrelation(params: NoiseParams, t: float | np.ndarray) -> float | np.ndarray:
    """Smooth (OU) part of the autocovariance, ``alpha * exp(-gamma |t|)``.

    The white part ``beta * delta(t)`` is singular and is accounted for
    analytically inside the block integrals, never sampled pointwise.
    """
    return params.alpha * np.exp(-params.gamma * np.abs(np.asarray(t, dtype=float)))


def _phi2(x: np.ndarray) -> np.ndarray:
    """Stable ``x - 1 + exp(-x)`` for x >= 0.

    Direct evaluation loses all digits for small x; below the switch point a
    truncated series keeps full relative precision.
    """
    x = np.asarray(x, dtype=float)
    small = x < 1e-2
    xs = np.where(small, x, 1.0)
    series = (
        xs**2 / 2.0 - xs**3 / 6.0 + xs**4 / 24.0 - xs**5 / 120.0
        + xs**6 / 720.0 - xs**7 / 5040.0
    )
    direct = np.expm1(-np.where(small, 1.0, x)) + np.where(small, 1.0, x)
    return np.where(small, series, direct)


def _block_cov_sequence(params: NoiseParams, T: float, m_max: int) -> np.ndarray:
    """Return g[m] = Cov(theta_i, theta_{i+m}) for m = 0 .. m_max.

    g[0] = (2 alpha / gamma^2)(gamma T - 1 + e^{-gamma T}) + beta T
    g[m] = (alpha / gamma^2) e^{-gamma (m-1) T} (1 - e^{-gamma T})^2,  m >= 1

    The white term appears only at lag 0 (disjoint windows meet on a set of
    measure zero).
    """
    a, b, g = params.alpha, params.beta, params.gamma
    out = np.empty(m_max + 1)
    out[0] = 2.0 * a / g**2 * _phi2(g * T) + b * T
    if m_max >= 1:
        m = np.arange(1, m_max + 1)
        one_minus_e = -np.expm1(-g * T)
        out[1:] = a / g**2 * np.exp(-g * (m - 1) * T) * one_minus_e**2
    return out


def block_kernel(params: NoiseParams, T: float, K: int) -> np.ndarray:
    """Covariance matrix of the K consecutive Ramsey phases theta_1..theta_K.

    Parameters
    ----------
    params : NoiseParams
    T : interrogation window length, s (> 0)
    K : number of windows (>= 1)

    Returns
    -------
    (K, K) symmetric Toeplitz positive-semidefinite array, units rad^2.
    """
    if T <= 0:
        raise ValueError(f"T must be > 0, got {T}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    g = _block_cov_sequence(params, T, K - 1)
    return toeplitz(g)


def cross_kernel(params: NoiseParams, T: float, k: int) -> np.ndarray:
    """Covariances H_i = Cov(theta_i, w) for the K = 2k - 1 probe windows.

    w = (1/tau) * (int_tau^2tau ω dt - int_0^tau ω dt) with tau = k T is the
    normalized frequency difference between the two adjacent averaging
    windows.  Both windows tile into k blocks of length T, so each H_i is an
    exact signed sum of block covariances; no numerical integration is
    involved.
    """
    if T <= 0:
        raise ValueError(f"T must be > 0, got {T}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    tau = k * T
    g = _block_cov_sequence(params, T, 2 * k - 1)
    K = 2 * k - 1
    H = np.empty(K)
    for i in range(1, K + 1):
        plus = sum(g[abs(i - j)] for j in range(k + 1, 2 * k + 1))
        minus = sum(g[abs(i - j)] for j in range(1, k + 1))
        H[i - 1] = (plus - minus) / tau
    return H


def free_lo_avar(params: NoiseParams, tau: float | np.ndarray) -> float | np.ndarray:
    """Fractional Allan variance of the free-running (uncorrected) LO.

    sigma2_lo(tau) = [ alpha (2 gamma tau - 3 + 4 e^{-gamma tau}
                       - e^{-2 gamma tau}) / gamma^2 + beta tau ]
                     / (omega0^2 tau^2)

    which is the two-window variance identity evaluated in closed form.
    Accepts scalar or array tau (> 0).
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr <= 0):
        raise ValueError("tau must be > 0")
    a, b, g, w0 = params.alpha, params.beta, params.gamma, params.omega0
    # 2*phi2(x) - (1-e^{-x})^2 rewritten for stability at small gamma*tau
    x = g * tau_arr
    ou = a / g**2 * (2.0 * _phi2(x) - np.expm1(-x) ** 2)
    out = (ou + b * tau_arr) / (w0**2 * tau_arr**2)
    return out if out.ndim else float(out)


def kernel_set(params: NoiseParams, T: float, k: int) -> KernelSet:
    """Bundle G, H, sigma2_lo and w_var for a (T, k) interrogation layout."""
    G = block_kernel(params, T, 2 * k - 1)
    H = cross_kernel(params, T, k)
    tau = k * T
    s2 = float(free_lo_avar(params, tau))
    return KernelSet(
        params=params, T=T, k=k, K=2 * k - 1, G=G, H=H,
        sigma2_lo=s2, w_var=2.0 * params.omega0**2 * s2,
    )


def sample_joint(
    params: NoiseParams, T: float, k: int, n_samples: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n_samples exact joint samples of (theta_1..theta_K, w).

    Uses the eigendecomposition of the bordered covariance
    [[G, H], [H^T, w_var]]; a minimum eigenvalue below -1e-10 relative to the
    largest signals an inconsistent kernel implementation and raises.

    Returns
    -------
    theta : (n_samples, K) array, w : (n_samples,) array.
    """
    n = n_samples
    if n < 1:
        raise ValueError(f"n_samples must be >= 1, got {n}")
    kernels = kernel_set(params, T, k)
    K = kernels.K
    cov = np.empty((K + 1, K + 1))
    cov[:K, :K] = kernels.G
    cov[:K, K] = kernels.H
    cov[K, :K] = kernels.H
    cov[K, K] = kernels.w_var
    evals, evecs = np.linalg.eigh(cov)
    scale = max(evals[-1], 0.0)
    if evals[0] < -1e-10 * max(scale, 1.0):
        raise ValueError(
            f"joint covariance not PSD (min eigenvalue {evals[0]:.3e}); "
            "kernel implementation inconsistent"
        )
    factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, K + 1))
    samples = z @ factor.T
    return samples[:, :K], samples[:, K]


def gen_trace(
    kind: str,
    params: NoiseParams,
    dt: float,
    n: int,
    seed: int,
    level: float = 1.0,
) -> np.ndarray:
    """Generate a discrete LO frequency-noise trace (rad/s), simulator use only.

    Samples represent bin averages over consecutive intervals of length dt.

    kind
        "white"       : intensity params.beta; bin average ~ N(0, beta/dt),
                        exact at any dt.
        "ou"          : params.alpha/params.gamma; exact stationary AR(1)
                        discretization of the OU process.
        "random_walk" : frequency random walk started at 0; increments
                        N(0, level^2 dt), so level^2 is the diffusion rate
                        in (rad/s)^2 / s.
        "flicker"     : 1/f frequency noise shaped in the spectral domain,
                        rescaled so its own non-overlapped Allan deviation at
                        tau = 1 s (angular units) equals `level`.  Requires
                        n * dt >= 2 s.

    Only "white" and "ou" correspond to the bound's noise model; the other
    two exist for servo experiments.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if kind == "white":
        sd = np.sqrt(params.beta / dt)
        return sd * rng.standard_normal(n)
    if kind == "ou":
        if params.alpha == 0.0:
            return np.zeros(n)
        a = np.exp(-params.gamma * dt)
        innov_sd = np.sqrt(params.alpha * (1.0 - a * a))
        x = np.empty(n)
        x[0] = np.sqrt(params.alpha) * rng.standard_normal()
        shocks = innov_sd * rng.standard_normal(n - 1)
        for i in range(1, n):
            x[i] = a * x[i - 1] + shocks[i - 1]
        return x
    if kind == "random_walk":
        steps = level * np.sqrt(dt) * rng.standard_normal(n)
        steps[0] = 0.0
        return np.cumsum(steps)
    if kind == "flicker":
        m = int(round(1.0 / dt))
        if m < 1 or n < 2 * m:
            raise ValueError(
                "flicker trace too short to normalize at tau = 1 s "
                f"(need n*dt >= 2, got n={n}, dt={dt})"
            )
        white = rng.standard_normal(n)
        spec = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, d=dt)
        shape = np.zeros_like(freqs)
        shape[1:] = freqs[1:] ** -0.5
        raw = np.fft.irfft(spec * shape, n=n)
        nwin = n // m
        block_means = raw[: nwin * m].reshape(nwin, m).mean(axis=1)
        diffs = np.diff(block_means)
        avar1 = 0.5 * np.mean(diffs**2)
        if avar1 <= 0.0:
            raise ValueError("flicker normalization failed (degenerate trace)")
        return raw * (level / np.sqrt(avar1))
    raise ValueError(f"unknown trace kind {kind!r}")
