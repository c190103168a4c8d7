"""Probe-state and interrogation-layout optimization of the bound.

Two state optimizers:

* `optimize_joint_state`: see-saw over arbitrary joint inputs.  Alternates
  the closed-form L solve with replacing the state by the ground eigenvector
  of the cost operator A_L; each half-step minimizes the same jointly convex
  functional, so the sigma2_q history is non-increasing.
* `optimize_product_state`: Nelder-Mead over per-step pure states (input
  rho0^(x)K).  `family` picks the chart: "symmetric" spans the full
  (N+1)-dimensional symmetric subspace (2N real parameters after gauge
  fixing), "coherent" restricts to atom-level product states (spin-coherent,
  one polar parameter; the azimuth is exactly irrelevant because per-step
  diagonal phase twists leave sigma2_q invariant).

`optimize_interrogation` sweeps k at fixed tau, `bound_curve` chains scans
over a tau grid with warm starts, and `extrapolate_long_term` reads off the
1/tau coefficient from the plateau of c(tau) = sigma2_q * omega0^2 * tau.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .core import (
    BoundWorkspace,
    JointProbe,
    ProductProbe,
    QavarResult,
    Scenario,
)
from .hilbert import SymmetricState, eigh, plus_step_state
from .noise import NoiseParams

__all__ = [
    "OptimizeReport",
    "KEvaluation",
    "InterrogationScan",
    "PlateauFit",
    "DimensionCapError",
    "cost_operator",
    "optimize_joint_state",
    "optimize_product_state",
    "optimize_interrogation",
    "bound_curve",
    "extrapolate_long_term",
]


class DimensionCapError(ValueError):
    """Joint dimension exceeds the configured cap."""


@dataclass
class OptimizeReport:
    """Result of a state optimization run."""

    sigma2_q: float
    state: np.ndarray
    kind: str
    history: list[float]
    iterations: int
    converged: bool
    n_evals: int = 0


@dataclass(frozen=True)
class KEvaluation:
    k: int
    T: float
    dim: int
    sigma2_q: float
    report: Optional[OptimizeReport] = None


@dataclass(frozen=True)
class InterrogationScan:
    tau: float
    k_opt: int
    T_opt: float
    sigma2_q: float
    sigma2_lo: float
    evaluations: tuple[KEvaluation, ...]


@dataclass(frozen=True)
class PlateauFit:
    """c(tau) plateau readout; `flat` is the convergence diagnostic."""

    c: float
    flat: bool
    spread: float
    taus: np.ndarray
    c_values: np.ndarray
    n_used: int


def cost_operator(L: np.ndarray, workspace: BoundWorkspace) -> np.ndarray:
    """Hermitian A_L with Tr(rho_in A_L) = cost_functional(rho_in, L) - sigma2_lo.

    Entrywise, with W the dephasing weights and u_a = a^T H:

        A_L[a, b] = W[a, b] * ( (L^2)[a, b] / (2 omega0^2)
                                - L[a, b] * i (a - b)^T H / omega0^2 )
    """
    w0sq = workspace.noise.omega0**2
    W = workspace.weights
    # factors[a, b] = (b - a)^T H, so (a - b)^T H = -factors
    A = W * (L @ L) / (2.0 * w0sq) + W * L * (1j * workspace.factors) / w0sq
    scale = max(np.abs(A).max(), 1.0)
    herm_defect = np.abs(A - A.conj().T).max()
    if herm_defect > 1e-10 * scale:
        raise ValueError(f"cost operator not Hermitian (defect {herm_defect:.3e})")
    return 0.5 * (A + A.conj().T)


def _initial_joint_vector(
    scenario: Scenario, rng: np.random.Generator
) -> np.ndarray:
    probe = scenario.probe
    if isinstance(probe, ProductProbe):
        from .hilbert import product_pure

        return product_pure(probe.state, scenario.n_steps)
    if isinstance(probe, JointProbe) and probe.vector is not None:
        v = np.asarray(probe.vector, dtype=complex).reshape(-1)
        return v / np.linalg.norm(v)
    v = rng.standard_normal(scenario.dim) + 1j * rng.standard_normal(scenario.dim)
    return v / np.linalg.norm(v)


def optimize_joint_state(
    scenario: Scenario,
    seed: int = 0,
    tol: float = 1e-10,
    max_iter: int = 300,
) -> OptimizeReport:
    """See-saw minimization over arbitrary joint input states.

    The scenario's probe seeds the iteration (random pure state if it is not
    usable as a vector).  Convergence is declared when sigma2_q changes by
    less than tol * sigma2_lo between sweeps.
    """
    ws = BoundWorkspace(scenario.noise, scenario.n_atoms, scenario.k, scenario.T)
    rng = np.random.default_rng(seed)
    psi = _initial_joint_vector(scenario, rng)
    history: list[float] = []
    converged = False
    floor = max(ws.kernels.sigma2_lo, 0.0)
    for _ in range(max_iter):
        res = ws.evaluate(psi, want_sld=True)
        history.append(res.sigma2_q)
        if len(history) >= 2 and abs(history[-2] - history[-1]) <= tol * max(floor, 1e-300):
            converged = True
            break
        A = cost_operator(res.sld, ws)
        _, V = eigh(A)
        psi = np.ascontiguousarray(V[:, 0]).astype(complex)
    return OptimizeReport(
        sigma2_q=history[-1],
        state=psi,
        kind="joint",
        history=history,
        iterations=len(history),
        converged=converged,
        n_evals=len(history),
    )


def _amps_from_chart(x: np.ndarray, n_atoms: int, with_phases: bool) -> np.ndarray:
    """Hyperspherical chart: N angles (+ N phases) -> N+1 unit amplitudes."""
    N = n_atoms
    angles = x[:N]
    amps = np.empty(N + 1, dtype=complex)
    rolling = 1.0
    for j in range(N):
        amps[j] = rolling * np.cos(angles[j])
        rolling = rolling * np.sin(angles[j])
    amps[N] = rolling
    if with_phases:
        amps[1:] = amps[1:] * np.exp(1j * x[N:])
    return amps


def _chart_from_amps(amps: np.ndarray, n_atoms: int) -> np.ndarray:
    """Inverse of _amps_from_chart (angles then phases, 2N entries)."""
    N = n_atoms
    mags = np.abs(amps)
    angles = np.empty(N)
    rolling = 1.0
    for j in range(N):
        c = np.clip(mags[j] / rolling if rolling > 1e-14 else 1.0, -1.0, 1.0)
        angles[j] = np.arccos(c)
        rolling = max(rolling * np.sin(angles[j]), 0.0)
    phases = np.angle(amps[1:])
    return np.concatenate([angles, phases])


def _coherent_amps(polar: float, n_atoms: int) -> np.ndarray:
    from .hilbert import coherent_step_state

    return np.asarray(coherent_step_state(n_atoms, polar, 0.0).amplitudes)


def optimize_product_state(
    scenario: Scenario,
    n_starts: int = 8,
    seed: int = 0,
    family: str = "symmetric",
    polish_phases: bool = True,
    maxfev: Optional[int] = None,
) -> OptimizeReport:
    """Optimize an identical per-step pure probe (input rho0^(x)K).

    family "symmetric": any per-step symmetric-subspace state; the search
    runs first over real amplitude charts (the fast LAPACK path; real charts
    are stationary points of the residual phases by conjugation symmetry)
    and, when polish_phases is true, refines over the full 2N-parameter
    chart.  family "coherent": atom-level product states, a single polar
    parameter.

    The scenario's probe, when it is a ProductProbe, seeds the first start
    (warm starting across a tau or k sweep).  History records the best
    sigma2_q seen after each cost evaluation.
    """
    if family not in ("symmetric", "coherent"):
        raise ValueError(f"unknown family {family!r}")
    N = scenario.n_atoms
    ws = BoundWorkspace(scenario.noise, scenario.n_atoms, scenario.k, scenario.T)
    rng = np.random.default_rng(seed)
    w0sq_tau = scenario.noise.omega0**2 * scenario.tau
    history: list[float] = []
    best = {"f": np.inf, "amps": None}
    n_evals = 0

    def eval_amps(amps: np.ndarray) -> float:
        nonlocal n_evals
        amps = amps / np.linalg.norm(amps)
        if np.abs(amps.imag).max() == 0.0:
            amps = amps.real
        from functools import reduce

        v = reduce(np.kron, [amps] * ws.n_steps) if ws.n_steps > 1 else amps
        s2q = ws.evaluate(v).sigma2_q
        n_evals += 1
        if s2q < best["f"]:
            best["f"] = s2q
            best["amps"] = amps.astype(complex)
        history.append(best["f"])
        return s2q * w0sq_tau  # scaled to O(1) so simplex tolerances bite

    if family == "coherent":
        objective = lambda x: eval_amps(_coherent_amps(float(x[0]), N))
        starts = [np.array([np.pi / 2.0])]
        starts += [rng.uniform(0.05, np.pi - 0.05, size=1) for _ in range(max(0, n_starts - 1))]
        fev = maxfev if maxfev is not None else 60
        for x0 in starts:
            minimize(objective, x0, method="Nelder-Mead",
                     options=dict(xatol=1e-6, fatol=1e-10, maxfev=fev))
        assert best["amps"] is not None
        return OptimizeReport(
            sigma2_q=best["f"], state=best["amps"], kind="product-coherent",
            history=history, iterations=len(history), converged=True,
            n_evals=n_evals,
        )

    # symmetric family, stage 1: real charts
    real_obj = lambda x: eval_amps(_amps_from_chart(x, N, with_phases=False))
    starts: list[np.ndarray] = []
    if isinstance(scenario.probe, ProductProbe) and scenario.probe.state.n_atoms == N:
        starts.append(_chart_from_amps(np.asarray(scenario.probe.state.amplitudes), N)[:N])
    starts.append(_chart_from_amps(np.asarray(plus_step_state(N).amplitudes), N)[:N])
    while len(starts) < max(1, n_starts):
        starts.append(rng.uniform(0.05, np.pi - 0.05, size=N))
    starts = starts[: max(1, n_starts)]
    fev = maxfev if maxfev is not None else 80 * N
    for x0 in starts:
        minimize(real_obj, x0, method="Nelder-Mead",
                 options=dict(xatol=1e-6, fatol=1e-10, maxfev=fev))
    assert best["amps"] is not None

    converged = True
    if polish_phases and N >= 1:
        full_obj = lambda x: eval_amps(_amps_from_chart(x, N, with_phases=True))
        x0 = _chart_from_amps(best["amps"], N)
        minimize(full_obj, x0, method="Nelder-Mead",
                 options=dict(xatol=1e-6, fatol=1e-10, maxfev=fev))
    return OptimizeReport(
        sigma2_q=best["f"], state=best["amps"], kind="product-symmetric",
        history=history, iterations=len(history), converged=converged,
        n_evals=n_evals,
    )


ProbeSpec = Union[str, ProductProbe, JointProbe, SymmetricState]


def _evaluate_fixed(
    noise: NoiseParams, n_atoms: int, k: int, T: float, probe: ProbeSpec
) -> float:
    from .core import qavar

    if isinstance(probe, SymmetricState):
        probe = ProductProbe(probe)
    scen = Scenario(noise=noise, n_atoms=n_atoms, k=k, T=T, probe=probe)
    return qavar(scen).sigma2_q


def optimize_interrogation(
    noise: NoiseParams,
    n_atoms: int,
    tau: float,
    k_max: int,
    probe: ProbeSpec = "optimize-product",
    dim_cap: int = 20_000,
    seed: int = 0,
    on_cap: str = "raise",
    family: str = "symmetric",
    n_starts: int = 8,
    polish_phases: bool = True,
    warm_state: Optional[SymmetricState] = None,
    maxfev: Optional[int] = None,
) -> InterrogationScan:
    """Sweep k = 1..k_max at fixed tau (T = tau/k) and pick the best layout.

    probe is either a fixed probe ("plus"/"ghz" resolve per step, or any
    ProductProbe/JointProbe/SymmetricState) or one of the optimizer modes
    "optimize-product" / "optimize-joint".  A k whose joint dimension
    (N+1)^(2k-1) exceeds dim_cap raises DimensionCapError naming it, or is
    skipped when on_cap="clamp" (at least one k must survive).
    """
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    if on_cap not in ("raise", "clamp"):
        raise ValueError(f"on_cap must be 'raise' or 'clamp', got {on_cap!r}")
    if isinstance(probe, str) and probe in ("plus", "ghz"):
        from .hilbert import ghz_step_state

        probe = plus_step_state(n_atoms) if probe == "plus" else ghz_step_state(n_atoms)

    evaluations: list[KEvaluation] = []
    warm = warm_state
    rng_seeds = np.random.SeedSequence(seed).spawn(k_max)
    for k in range(1, k_max + 1):
        dim = (n_atoms + 1) ** (2 * k - 1)
        if dim > dim_cap:
            if on_cap == "clamp":
                break
            raise DimensionCapError(
                f"k={k} needs joint dimension {dim} > cap {dim_cap} "
                f"(N={n_atoms}, K={2 * k - 1})"
            )
        T = tau / k
        report = None
        if probe == "optimize-product":
            init = warm if warm is not None else plus_step_state(n_atoms)
            scen = Scenario(noise=noise, n_atoms=n_atoms, k=k, T=T,
                            probe=ProductProbe(init))
            report = optimize_product_state(
                scen,
                n_starts=n_starts if dim <= 512 else min(n_starts, 2),
                seed=int(rng_seeds[k - 1].generate_state(1)[0]),
                family=family,
                polish_phases=polish_phases and dim <= 512,
                maxfev=maxfev,
            )
            s2q = report.sigma2_q
            warm = SymmetricState(n_atoms=n_atoms, amplitudes=report.state)
        elif probe == "optimize-joint":
            scen = Scenario(noise=noise, n_atoms=n_atoms, k=k, T=T,
                            probe=ProductProbe(plus_step_state(n_atoms)))
            report = optimize_joint_state(
                scen, seed=int(rng_seeds[k - 1].generate_state(1)[0])
            )
            s2q = report.sigma2_q
        elif isinstance(probe, str):
            raise ValueError(f"unknown probe spec {probe!r}")
        else:
            s2q = _evaluate_fixed(noise, n_atoms, k, T, probe)
        evaluations.append(KEvaluation(k=k, T=T, dim=dim, sigma2_q=s2q, report=report))
    if not evaluations:
        raise DimensionCapError(
            f"no k in 1..{k_max} fits dimension cap {dim_cap} for N={n_atoms}"
        )
    best = min(evaluations, key=lambda e: e.sigma2_q)
    from .noise import free_lo_avar

    return InterrogationScan(
        tau=tau,
        k_opt=best.k,
        T_opt=best.T,
        sigma2_q=best.sigma2_q,
        sigma2_lo=float(free_lo_avar(noise, tau)),
        evaluations=tuple(evaluations),
    )


def bound_curve(
    noise: NoiseParams,
    n_atoms: int,
    taus: Sequence[float],
    k_max: int,
    probe: ProbeSpec = "optimize-product",
    dim_cap: int = 20_000,
    seed: int = 0,
    family: str = "symmetric",
    n_starts: int = 8,
    polish_phases: bool = True,
    maxfev: Optional[int] = None,
) -> list[InterrogationScan]:
    """Interrogation scans over a tau grid, warm-starting the per-step probe
    across consecutive tau values (the optimum moves slowly along the grid)."""
    scans: list[InterrogationScan] = []
    warm = None
    for i, tau in enumerate(sorted(taus)):
        scan = optimize_interrogation(
            noise, n_atoms, float(tau), k_max,
            probe=probe, dim_cap=dim_cap, seed=seed + i, on_cap="clamp",
            family=family, n_starts=n_starts, polish_phases=polish_phases,
            warm_state=warm, maxfev=maxfev,
        )
        scans.append(scan)
        if probe == "optimize-product":
            best_eval = min(scan.evaluations, key=lambda e: e.sigma2_q)
            if best_eval.report is not None:
                warm = SymmetricState(n_atoms=n_atoms, amplitudes=best_eval.report.state)
    return scans


def extrapolate_long_term(
    taus: Sequence[float],
    sigma2_qs: Sequence[float],
    omega0: float,
    m: int = 5,
    flat_tol: float = 0.05,
) -> PlateauFit:
    """Read the long-term coefficient c from sigma2_q(tau) ~ c / (omega0^2 tau).

    Takes the last m points of c(tau) = sigma2_q * omega0^2 * tau on the
    sorted grid; `flat` reports whether their spread (max - min, relative to
    the mean) is within flat_tol.  A non-flat tail means the grid has not
    reached the 1/tau regime and the returned c is not trustworthy.
    """
    taus = np.asarray(taus, dtype=float)
    s2 = np.asarray(sigma2_qs, dtype=float)
    if taus.shape != s2.shape or taus.ndim != 1 or taus.size == 0:
        raise ValueError("taus and sigma2_qs must be equal-length 1-D sequences")
    order = np.argsort(taus)
    taus = taus[order]
    c_values = s2[order] * omega0**2 * taus
    n_used = min(m, taus.size)
    tail = c_values[-n_used:]
    mean = float(np.mean(tail))
    spread = float((tail.max() - tail.min()) / abs(mean)) if mean != 0.0 else np.inf
    flat = bool(spread <= flat_tol and n_used >= m)
    return PlateauFit(
        c=mean, flat=flat, spread=spread, taus=taus, c_values=c_values,
        n_used=n_used,
    )
