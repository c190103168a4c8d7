"""Quantum Allan variance of an LO-limited atomic clock.

For Gaussian LO noise the minimum achievable Allan variance at averaging
time tau = k T, over all measurement and feedback strategies acting on K =
2k - 1 probe steps, is

    sigma2_q = sigma2_lo - Tr(rho_bar_avg L^2) / (2 omega0^2)

where rho_bar_avg is the dephasing-averaged joint probe state, L is the
symmetric-logarithmic-derivative-like operator solving

    rho_bar' = (L rho_bar + rho_bar L) / 2,

and rho_bar' is the noise-probe correlation operator.  Gaussianity makes the
averages exact entrywise in the excitation basis:

    rho_bar[a, b]  = rho_in[a, b] * exp(-1/2 (a-b)^T G (a-b))
    rho_bar'[a, b] = rho_bar[a, b] * i (b - a)^T H

with multi-indices a (row) and b (column) and the kernels G, H of
:mod:`qavar.noise`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .hilbert import JointDensity, SymmetricState, eigh, multi_index_table, product_pure
from .noise import KernelSet, NoiseParams, kernel_set, sample_joint

__all__ = [
    "ProductProbe",
    "JointProbe",
    "Scenario",
    "QavarResult",
    "McOracleResult",
    "BoundWorkspace",
    "dephasing_weights",
    "derivative_factors",
    "build_rho_bar",
    "build_rho_prime",
    "solve_sld",
    "qavar",
    "cost_functional",
    "mc_oracle",
]

DEFAULT_SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class ProductProbe:
    """Identical per-step probe, joint input rho0^(x)K."""

    state: SymmetricState


@dataclass(frozen=True)
class JointProbe:
    """Arbitrary joint input over all K steps (entangled across steps).

    Exactly one of `vector` (pure) or `density` must be given.
    """

    vector: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if (self.vector is None) == (self.density is None):
            raise ValueError("JointProbe needs exactly one of vector or density")


Probe = Union[ProductProbe, JointProbe]


@dataclass(frozen=True)
class Scenario:
    """A fully specified bound computation.

    k interrogation steps of length T per averaging window, tau = k T,
    K = 2k - 1 probe steps, N atoms, and an input probe.
    """

    noise: NoiseParams
    n_atoms: int
    k: int
    T: float
    probe: Probe

    def __post_init__(self) -> None:
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.T <= 0:
            raise ValueError(f"T must be > 0, got {self.T}")

    @property
    def tau(self) -> float:
        return self.k * self.T

    @property
    def n_steps(self) -> int:
        return 2 * self.k - 1

    @property
    def dim(self) -> int:
        return (self.n_atoms + 1) ** self.n_steps


@dataclass(frozen=True)
class QavarResult:
    """Bound output: sigma2_q = sigma2_lo - correction, all fractional."""

    tau: float
    sigma2_lo: float
    correction: float
    sigma2_q: float
    sld: Optional[np.ndarray]
    support_cut: float


@dataclass(frozen=True)
class McOracleResult:
    """Monte-Carlo dephasing averages with per-entry standard errors.

    Standard errors are packed as se_re + 1j * se_im, entrywise.
    """

    rho_bar: np.ndarray
    rho_prime: np.ndarray
    rho_bar_se: np.ndarray
    rho_prime_se: np.ndarray
    n_samples: int


def dephasing_weights(G: np.ndarray, n_atoms: int) -> np.ndarray:
    """Entrywise Gaussian dephasing factors exp(-1/2 (a-b)^T G (a-b)).

    G is the (K, K) phase covariance; works for any K, not only 2k - 1.
    """
    K = G.shape[0]
    A = multi_index_table(n_atoms, K).astype(float)
    M = A @ G
    s = np.einsum("dk,dk->d", A, M)
    quad = s[:, None] + s[None, :] - 2.0 * (M @ A.T)
    return np.exp(-0.5 * quad)


def derivative_factors(H: np.ndarray, n_atoms: int) -> np.ndarray:
    """Entrywise factors (b - a)^T H (column minus row multi-index).

    rho_bar'[a, b] = rho_bar[a, b] * 1j * derivative_factors(H, N)[a, b].
    """
    K = H.shape[0]
    A = multi_index_table(n_atoms, K).astype(float)
    u = A @ H
    return u[None, :] - u[:, None]


def _resolve_rho_in(scenario: Scenario) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Return (rho_in matrix, pure vector or None) for the scenario probe."""
    dim = scenario.dim
    probe = scenario.probe
    if isinstance(probe, ProductProbe):
        if probe.state.n_atoms != scenario.n_atoms:
            raise ValueError(
                f"probe has {probe.state.n_atoms} atoms, scenario {scenario.n_atoms}"
            )
        v = product_pure(probe.state, scenario.n_steps)
        return np.outer(v, v.conj()), v
    if probe.vector is not None:
        v = np.asarray(probe.vector, dtype=complex).reshape(-1)
        if v.shape != (dim,):
            raise ValueError(f"joint vector length {v.shape[0]}, expected {dim}")
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"joint vector not normalized (|.| = {nrm!r})")
        return np.outer(v, v.conj()), v
    m = np.asarray(probe.density, dtype=complex)
    if m.shape != (dim, dim):
        raise ValueError(f"joint density shape {m.shape}, expected {(dim, dim)}")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.conj().T).max() > 1e-12 * scale:
        raise ValueError("joint density is not Hermitian")
    if abs(np.trace(m).real - 1.0) > 1e-10:
        raise ValueError(f"joint density trace {np.trace(m).real!r}, expected 1")
    return m, None


class BoundWorkspace:
    """Amortized bound evaluator for a fixed (noise, N, k, T) layout.

    Precomputes the kernels and the entrywise dephasing/derivative factor
    matrices once; each `evaluate` call then costs one assembly plus one
    Hermitian eigensolve.  Real inputs stay on the real LAPACK path.
    """

    def __init__(
        self,
        noise: NoiseParams,
        n_atoms: int,
        k: int,
        T: float,
        support_tol: float = DEFAULT_SUPPORT_TOL,
    ) -> None:
        self.noise = noise
        self.n_atoms = n_atoms
        self.k = k
        self.T = T
        self.support_tol = support_tol
        self.kernels: KernelSet = kernel_set(noise, T, k)
        self.n_steps = self.kernels.K
        self.dim = (n_atoms + 1) ** self.n_steps
        self.weights = dephasing_weights(self.kernels.G, n_atoms)
        self.factors = derivative_factors(self.kernels.H, n_atoms)

    def rho_bar(self, rho_in: np.ndarray) -> np.ndarray:
        return rho_in * self.weights

    def rho_prime(self, rho_bar: np.ndarray) -> np.ndarray:
        return rho_bar * (1j * self.factors)

    def evaluate(
        self,
        rho_in: np.ndarray,
        want_sld: bool = False,
    ) -> QavarResult:
        """Bound for a joint input matrix (D, D) or pure vector (D,)."""
        rho_in = np.asarray(rho_in)
        if rho_in.ndim == 1:
            rho_in = np.outer(rho_in, rho_in.conj())
        if rho_in.shape != (self.dim, self.dim):
            raise ValueError(f"input shape {rho_in.shape}, expected {(self.dim, self.dim)}")
        rb = rho_in * self.weights
        is_real = not np.iscomplexobj(rb) or np.abs(rb.imag).max() == 0.0
        w0sq = self.noise.omega0**2
        if is_real:
            rb_r = rb.real if np.iscomplexobj(rb) else rb
            lam, V = scipy.linalg.eigh(0.5 * (rb_r + rb_r.T), driver="evd")
            # rho_prime = i * S with S real; |<r|rho_prime|s>|^2 = (V^T S V)^2
            P = V.T @ (rb_r * self.factors) @ V
            P2 = P * P
        else:
            lam, V = eigh(rb)
            rp = rb * (1j * self.factors)
            Pc = V.conj().T @ rp @ V
            P = Pc
            P2 = Pc.real**2 + Pc.imag**2
        denom = lam[:, None] + lam[None, :]
        cut = self.support_tol * max(float(lam[-1]), 0.0)
        mask = denom > cut
        correction = float(np.sum(P2[mask] / denom[mask])) / w0sq
        sld = None
        if want_sld:
            Lt = np.zeros_like(P)
            Lt[mask] = 2.0 * P[mask] / denom[mask]
            if is_real:
                sld = V @ (1j * Lt) @ V.T
            else:
                sld = V @ Lt @ V.conj().T
        s2lo = self.kernels.sigma2_lo
        return QavarResult(
            tau=self.k * self.T,
            sigma2_lo=s2lo,
            correction=correction,
            sigma2_q=s2lo - correction,
            sld=sld,
            support_cut=cut,
        )


def build_rho_bar(scenario: Scenario) -> JointDensity:
    """Dephasing-averaged joint state rho_bar over the K = 2k - 1 probe steps."""
    ws = BoundWorkspace(scenario.noise, scenario.n_atoms, scenario.k, scenario.T)
    rho_in, _ = _resolve_rho_in(scenario)
    return JointDensity(
        n_atoms=scenario.n_atoms,
        n_steps=scenario.n_steps,
        matrix=ws.rho_bar(rho_in),
    )


def build_rho_prime(
    scenario: Scenario,
    rho_bar: Optional[JointDensity] = None,
) -> np.ndarray:
    """Noise-probe correlation operator rho_bar'.

    Entrywise: rho_bar'[a, b] = rho_bar[a, b] * i (b - a)^T H.  Hermitian,
    traceless, zero wherever rho_bar is diagonal.
    """
    if rho_bar is None:
        rho_bar = build_rho_bar(scenario)
    kernels = kernel_set(scenario.noise, scenario.T, scenario.k)
    fac = derivative_factors(kernels.H, scenario.n_atoms)
    return rho_bar.matrix * (1j * fac)


def solve_sld(
    rho_bar: np.ndarray,
    rho_prime: np.ndarray,
    support_tol: float = DEFAULT_SUPPORT_TOL,
) -> np.ndarray:
    """Solve rho_prime = (L rho_bar + rho_bar L)/2 for Hermitian L.

    In the rho_bar eigenbasis L_rs = 2 rho_prime_rs / (lam_r + lam_s);
    entries with lam_r + lam_s <= support_tol * lam_max are set to zero
    (rho_prime vanishes on the kernel of rho_bar analytically, so the
    discarded entries carry no bound weight).
    """
    lam, V = eigh(rho_bar)
    P = V.conj().T @ rho_prime @ V
    denom = lam[:, None] + lam[None, :]
    cut = support_tol * max(float(lam[-1]), 0.0)
    Lt = np.zeros_like(P, dtype=complex)
    mask = denom > cut
    Lt[mask] = 2.0 * P[mask] / denom[mask]
    return V @ Lt @ V.conj().T


def qavar(
    scenario: Scenario,
    want_sld: bool = False,
    support_tol: float = DEFAULT_SUPPORT_TOL,
) -> QavarResult:
    """Quantum Allan variance bound for a scenario.

    Returns sigma2_lo, the eigenbasis correction sum, their difference
    sigma2_q, and optionally the optimal L operator.
    """
    ws = BoundWorkspace(
        scenario.noise, scenario.n_atoms, scenario.k, scenario.T, support_tol
    )
    rho_in, v = _resolve_rho_in(scenario)
    return ws.evaluate(rho_in if v is None else v, want_sld=want_sld)


def cost_functional(
    rho_in: np.ndarray,
    L: np.ndarray,
    scenario: Scenario,
) -> float:
    """sigma2_lo - Tr(L rho_bar')/omega0^2 + Tr(L^2 rho_bar)/(2 omega0^2).

    Jointly convex certificate: equals sigma2_q(rho_in) at the optimal L and
    upper-bounds it for any other Hermitian L.
    """
    ws = BoundWorkspace(scenario.noise, scenario.n_atoms, scenario.k, scenario.T)
    rho_in = np.asarray(rho_in)
    if rho_in.ndim == 1:
        rho_in = np.outer(rho_in, rho_in.conj())
    rb = ws.rho_bar(rho_in)
    rp = ws.rho_prime(rb)
    w0sq = scenario.noise.omega0**2
    t1 = np.trace(L @ rp).real / w0sq
    t2 = np.trace(L @ L @ rb).real / (2.0 * w0sq)
    return float(ws.kernels.sigma2_lo - t1 + t2)


def mc_oracle(
    scenario: Scenario,
    n_samples: int,
    seed: int,
    chunk: int = 100_000,
) -> McOracleResult:
    """Monte-Carlo check of the Gaussian dephasing averages.

    Draws (theta, w) from the exact joint normal and averages
    D(theta) rho_in D(theta)^dag and its w-weighted version, where D(theta)
    is diagonal with entries exp(-i sum_i n_i theta_i).  Standard errors come
    from exact trigonometric second moments, so they are deterministic given
    the seed and independent of the chunk size.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    ws = BoundWorkspace(scenario.noise, scenario.n_atoms, scenario.k, scenario.T)
    rho_in, _ = _resolve_rho_in(scenario)
    A = multi_index_table(scenario.n_atoms, scenario.n_steps).astype(float)
    dim = ws.dim

    M1 = np.zeros((dim, dim), dtype=complex)
    M1w = np.zeros((dim, dim), dtype=complex)
    M2 = np.zeros((dim, dim), dtype=complex)
    M2w2 = np.zeros((dim, dim), dtype=complex)
    sum_w2 = 0.0

    theta, w = sample_joint(scenario.noise, scenario.T, scenario.k, n_samples, seed)
    for lo in range(0, n_samples, chunk):
        hi = min(lo + chunk, n_samples)
        E = np.exp(-1j * (A @ theta[lo:hi].T))
        wc = w[lo:hi]
        Ec = E.conj()
        M1 += E @ Ec.T
        M1w += (E * wc) @ Ec.T
        E2 = E * E
        E2c = E2.conj()
        M2 += E2 @ E2c.T
        M2w2 += (E2 * wc**2) @ E2c.T
        sum_w2 += float(np.sum(wc**2))

    n = float(n_samples)

    def _moments(first: np.ndarray, second: np.ndarray, norm2: float):
        """Mean and (se_re, se_im) of mean(q * exp(-iP)) given Gram sums."""
        mean = first / n
        e_cos2 = 0.5 * (norm2 / n + second.real / n)
        e_sin2 = 0.5 * (norm2 / n - second.real / n)
        e_cossin = -0.5 * second.imag / n
        # sample components: X = q cos P (real part), Y = -q sin P (imag part)
        var_x = np.clip(e_cos2 - mean.real**2, 0.0, None)
        var_y = np.clip(e_sin2 - mean.imag**2, 0.0, None)
        cov_xy = -(e_cossin - mean.real * (-mean.imag))
        return mean, var_x / n, var_y / n, cov_xy / n

    zb, vxb, vyb, cxyb = _moments(M1, M2, n)
    zp, vxp, vyp, cxyp = _moments(M1w, M2w2, sum_w2)

    def _propagate(z, vx, vy, cxy):
        re, im = rho_in.real, rho_in.imag
        var_re = re**2 * vx + im**2 * vy - 2.0 * re * im * cxy
        var_im = im**2 * vx + re**2 * vy + 2.0 * re * im * cxy
        se = np.sqrt(np.clip(var_re, 0.0, None)) + 1j * np.sqrt(np.clip(var_im, 0.0, None))
        return rho_in * z, se

    rb_mc, rb_se = _propagate(zb, vxb, vyb, cxyb)
    rp_mc, rp_se = _propagate(zp, vxp, vyp, cxyp)
    return McOracleResult(
        rho_bar=rb_mc,
        rho_prime=rp_mc,
        rho_bar_se=rb_se,
        rho_prime_se=rp_se,
        n_samples=n_samples,
    )
