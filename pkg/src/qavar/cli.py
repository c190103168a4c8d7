"""Command-line front end: JSON config in, CSV out.

    qavar <mode> --config <path> [--out <path>] [--seed <u64>] [--threads <n>]

Modes: bound, optimize, simulate, lo-avar, bound-check.  The config schema is
strict (unknown or mode-inapplicable keys are rejected, messages carry field
paths).  Output is deterministic: the same config and seeds give a
byte-identical CSV, metadata lines ('# ...') carry the tool version, a hash
of the resolved config, and the master seed.

Exit codes: 0 success, 2 validation error, 3 resource cap left no work,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import __version__
from .clock import ServoConfig, SimConfig, avar_estimate, simulate_clock
from .core import ProductProbe, Scenario, qavar
from .hilbert import SymmetricState, ghz_step_state, plus_step_state
from .noise import NoiseParams, free_lo_avar
from .optimize import DimensionCapError, optimize_interrogation

__all__ = ["CliConfigError", "RunConfig", "validate", "run", "main"]

MODES = ("bound", "optimize", "simulate", "lo-avar", "bound-check")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3
EXIT_NUMERICAL = 4


class CliConfigError(Exception):
    """Validation failure; `errors` lists one message per offending field."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class RunConfig:
    """A validated, fully defaulted run description."""

    mode: str
    noise: NoiseParams
    taus: np.ndarray
    atoms: int = 0
    k_max: int = 0
    probe_kind: str = ""
    probe_amplitudes: Optional[np.ndarray] = None
    probe_family: str = "symmetric"
    servo: ServoConfig = field(default_factory=ServoConfig)
    sim_T: float = 0.0
    n_steps: int = 0
    n_runs: int = 0
    seed: int = 0
    out: str = ""
    dim_cap: int = 20_000
    tol: float = 1e-8

    def canonical(self) -> dict:
        """Resolved config as a plain dict (hash input; excludes out path)."""
        doc: dict[str, Any] = {
            "mode": self.mode,
            "noise": {
                "alpha": self.noise.alpha, "beta": self.noise.beta,
                "gamma": self.noise.gamma, "omega0": self.noise.omega0,
            },
            "tau": [float(t) for t in self.taus],
            "seeds": [self.seed],
            "dim_cap": self.dim_cap,
            "tol": self.tol,
        }
        if self.mode != "lo-avar":
            doc["atoms"] = self.atoms
        if self.mode in ("bound", "optimize"):
            doc["k_max"] = self.k_max
        if self.mode in ("bound", "optimize", "bound-check"):
            doc["probe"] = {"kind": self.probe_kind}
            if self.probe_amplitudes is not None:
                doc["probe"]["amplitudes"] = [
                    [float(a.real), float(a.imag)] for a in self.probe_amplitudes
                ]
            if self.probe_kind == "optimize-product":
                doc["probe"]["family"] = self.probe_family
        if self.mode in ("simulate", "bound-check"):
            doc["servo"] = {"gain": self.servo.gain, "estimator": self.servo.estimator}
            doc["sim"] = {"T": self.sim_T, "n_steps": self.n_steps, "n_runs": self.n_runs}
        return doc


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x: Any) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate(
    doc: Any,
    mode_override: Optional[str] = None,
    seed_override: Optional[int] = None,
    out_override: Optional[str] = None,
) -> RunConfig:
    """Check a parsed JSON document against the strict schema.

    Raises CliConfigError listing every problem found (field paths included).
    """
    errors: list[str] = []

    def err(msg: str) -> None:
        errors.append(msg)

    if not isinstance(doc, dict):
        raise CliConfigError(["config: top level must be a JSON object"])

    mode = doc.get("mode", mode_override)
    if mode is None:
        err("mode: missing (give it in the config or on the command line)")
    elif mode not in MODES:
        err(f"mode: must be one of {', '.join(MODES)}; got {mode!r}")
    elif mode_override is not None and "mode" in doc and doc["mode"] != mode_override:
        err(f"mode: config says {doc['mode']!r} but command line says {mode_override!r}")
    if errors:
        raise CliConfigError(errors)

    allowed = {"mode", "noise", "tau", "seeds", "out", "dim_cap", "tol"}
    if mode != "lo-avar":
        allowed.add("atoms")
    if mode in ("bound", "optimize"):
        allowed.add("k_max")
    if mode in ("bound", "optimize", "bound-check"):
        allowed.add("probe")
    if mode in ("simulate", "bound-check"):
        allowed.update(("servo", "sim"))
    for key in doc:
        if key not in allowed:
            err(f"{key}: unknown or not allowed in mode {mode}")

    # noise block
    noise = None
    nd = doc.get("noise")
    if nd is None:
        err("noise: missing")
    elif not isinstance(nd, dict):
        err("noise: must be an object")
    else:
        for key in nd:
            if key not in ("alpha", "beta", "gamma", "omega0"):
                err(f"noise.{key}: unknown key")
        vals = {}
        for key, cond, desc in (
            ("alpha", lambda v: v >= 0, ">= 0"),
            ("beta", lambda v: v >= 0, ">= 0"),
            ("gamma", lambda v: v > 0, "> 0"),
            ("omega0", lambda v: v > 0, "> 0"),
        ):
            v = nd.get(key)
            if v is None:
                err(f"noise.{key}: missing")
            elif not _is_number(v):
                err(f"noise.{key}: must be a number")
            elif not cond(v):
                err(f"noise.{key}: must be {desc}, got {v}")
            else:
                vals[key] = float(v)
        if len(vals) == 4:
            noise = NoiseParams(**vals)

    # tau grid
    taus = None
    td = doc.get("tau")
    if td is None:
        err("tau: missing")
    elif isinstance(td, list):
        if not td:
            err("tau: must be a non-empty list")
        elif not all(_is_number(t) and t > 0 for t in td):
            err("tau: every entry must be a number > 0")
        else:
            taus = np.asarray([float(t) for t in td])
    elif isinstance(td, dict):
        for key in td:
            if key not in ("start", "stop", "points", "spacing"):
                err(f"tau.{key}: unknown key")
        start, stop, points = td.get("start"), td.get("stop"), td.get("points")
        spacing = td.get("spacing", "log")
        ok = True
        if not (_is_number(start) and start > 0):
            err("tau.start: must be a number > 0")
            ok = False
        if not (_is_number(stop) and stop is not None and start is not None
                and _is_number(start) and stop >= start):
            err("tau.stop: must be a number >= tau.start")
            ok = False
        if not (_is_int(points) and points >= 1):
            err("tau.points: must be an integer >= 1")
            ok = False
        if spacing not in ("log", "linear"):
            err(f"tau.spacing: must be 'log' or 'linear', got {spacing!r}")
            ok = False
        if ok:
            if spacing == "log":
                taus = np.geomspace(float(start), float(stop), int(points))
            else:
                taus = np.linspace(float(start), float(stop), int(points))
    else:
        err("tau: must be a list of numbers or a range object")

    cfg = RunConfig(mode=mode, noise=noise, taus=taus)

    if mode != "lo-avar":
        atoms = doc.get("atoms")
        if atoms is None:
            err("atoms: missing")
        elif not (_is_int(atoms) and atoms >= 1):
            err(f"atoms: must be an integer >= 1, got {atoms!r}")
        else:
            cfg.atoms = atoms

    if mode in ("bound", "optimize"):
        k_max = doc.get("k_max")
        if k_max is None:
            err("k_max: missing")
        elif not (_is_int(k_max) and k_max >= 1):
            err(f"k_max: must be an integer >= 1, got {k_max!r}")
        else:
            cfg.k_max = k_max

    if mode in ("bound", "optimize", "bound-check"):
        pd = doc.get("probe")
        fixed_kinds = ("plus", "ghz", "amplitudes")
        opt_kinds = ("optimize-product", "optimize-joint")
        want = opt_kinds if mode == "optimize" else fixed_kinds
        if pd is None:
            err("probe: missing")
        elif not isinstance(pd, dict):
            err("probe: must be an object")
        else:
            for key in pd:
                if key not in ("kind", "amplitudes", "family"):
                    err(f"probe.{key}: unknown key")
            kind = pd.get("kind")
            if kind not in want:
                err(f"probe.kind: must be one of {', '.join(want)} in mode {mode}; "
                    f"got {kind!r}")
            else:
                cfg.probe_kind = kind
            if kind == "amplitudes":
                amps = pd.get("amplitudes")
                n = cfg.atoms
                if not isinstance(amps, list) or (
                    n and len(amps) != n + 1
                ) or not all(
                    isinstance(a, list) and len(a) == 2 and all(_is_number(x) for x in a)
                    for a in (amps or [])
                ):
                    err("probe.amplitudes: must be a list of atoms+1 [re, im] pairs")
                else:
                    arr = np.array([complex(a[0], a[1]) for a in amps])
                    if abs(np.linalg.norm(arr) - 1.0) > 1e-10:
                        err("probe.amplitudes: not normalized within 1e-10")
                    else:
                        cfg.probe_amplitudes = arr
            elif "amplitudes" in pd:
                err("probe.amplitudes: only allowed with kind 'amplitudes'")
            fam = pd.get("family", "symmetric")
            if "family" in pd and kind != "optimize-product":
                err("probe.family: only allowed with kind 'optimize-product'")
            elif fam not in ("symmetric", "coherent"):
                err(f"probe.family: must be 'symmetric' or 'coherent', got {fam!r}")
            else:
                cfg.probe_family = fam

    if mode in ("simulate", "bound-check"):
        sd = doc.get("servo", {})
        if not isinstance(sd, dict):
            err("servo: must be an object")
            sd = {}
        for key in sd:
            if key not in ("gain", "estimator"):
                err(f"servo.{key}: unknown key")
        gain = sd.get("gain", 0.5)
        estimator = sd.get("estimator", "linear")
        if not (_is_number(gain) and 0 < gain <= 2):
            err(f"servo.gain: must be a number in (0, 2], got {gain!r}")
        elif estimator not in ("linear", "arcsine"):
            err(f"servo.estimator: must be 'linear' or 'arcsine', got {estimator!r}")
        else:
            cfg.servo = ServoConfig(gain=float(gain), estimator=estimator)

        smd = doc.get("sim")
        if smd is None:
            err("sim: missing")
        elif not isinstance(smd, dict):
            err("sim: must be an object")
        else:
            for key in smd:
                if key not in ("T", "n_steps", "n_runs"):
                    err(f"sim.{key}: unknown key")
            T = smd.get("T")
            n_steps = smd.get("n_steps")
            n_runs = smd.get("n_runs")
            if not (_is_number(T) and T > 0):
                err(f"sim.T: must be a number > 0, got {T!r}")
            else:
                cfg.sim_T = float(T)
            if not (_is_int(n_steps) and n_steps >= 2):
                err(f"sim.n_steps: must be an integer >= 2, got {n_steps!r}")
            else:
                cfg.n_steps = n_steps
            if not (_is_int(n_runs) and n_runs >= 2):
                err(f"sim.n_runs: must be an integer >= 2, got {n_runs!r}")
            else:
                cfg.n_runs = n_runs
        if cfg.sim_T > 0 and taus is not None:
            for t in taus:
                ratio = t / cfg.sim_T
                if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
                    err(f"tau: {t} is not a positive integer multiple of sim.T={cfg.sim_T}")

    seeds = doc.get("seeds", [0])
    if not (isinstance(seeds, list) and len(seeds) == 1 and _is_int(seeds[0])
            and seeds[0] >= 0):
        err("seeds: must be a list with exactly one unsigned integer (master seed)")
    else:
        cfg.seed = seeds[0]
    if seed_override is not None:
        if seed_override < 0:
            err("--seed: must be >= 0")
        else:
            cfg.seed = seed_override

    out = doc.get("out", f"{mode}.csv")
    if not isinstance(out, str) or not out:
        err("out: must be a non-empty string")
    else:
        cfg.out = out
    if out_override is not None:
        cfg.out = out_override

    dim_cap = doc.get("dim_cap", 20_000)
    if not (_is_int(dim_cap) and dim_cap >= 2):
        err(f"dim_cap: must be an integer >= 2, got {dim_cap!r}")
    else:
        cfg.dim_cap = dim_cap

    tol = doc.get("tol", 1e-8)
    if not (_is_number(tol) and tol > 0):
        err(f"tol: must be a number > 0, got {tol!r}")
    else:
        cfg.tol = float(tol)

    if errors:
        raise CliConfigError(errors)
    return cfg


def _fixed_probe(cfg: RunConfig) -> SymmetricState:
    if cfg.probe_kind == "plus":
        return plus_step_state(cfg.atoms)
    if cfg.probe_kind == "ghz":
        return ghz_step_state(cfg.atoms)
    return SymmetricState(n_atoms=cfg.atoms, amplitudes=cfg.probe_amplitudes)


def _fmt(value: Any) -> str:
    """Shortest round-trip CSV token."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _fmt_state(state: np.ndarray) -> str:
    if state.size > 64:
        return f"dim={state.size}"
    return ";".join(f"{float(a.real)!r}:{float(a.imag)!r}" for a in state)


def _map_tasks(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _rows_lo_avar(cfg: RunConfig, threads: int) -> tuple[list[str], list[list[str]]]:
    header = ["tau", "sigma2_lo", "status"]
    rows = [
        [_fmt(float(t)), _fmt(float(free_lo_avar(cfg.noise, float(t)))), "ok"]
        for t in cfg.taus
    ]
    return header, rows


def _rows_bound(cfg: RunConfig, threads: int) -> tuple[list[str], list[list[str]]]:
    header = ["tau", "k", "T", "sigma2_lo", "sigma2_q", "c_running", "seed", "status"]
    probe = _fixed_probe(cfg)
    w0sq = cfg.noise.omega0**2

    def one(tau: float) -> list[str]:
        try:
            scan = optimize_interrogation(
                cfg.noise, cfg.atoms, tau, cfg.k_max,
                probe=probe, dim_cap=cfg.dim_cap, on_cap="clamp",
            )
        except DimensionCapError as exc:
            return [_fmt(tau), "", "", "", "", "", _fmt(cfg.seed), f"skipped: {exc}"]
        c = scan.sigma2_q * w0sq * tau
        return [
            _fmt(tau), _fmt(scan.k_opt), _fmt(scan.T_opt),
            _fmt(scan.sigma2_lo), _fmt(scan.sigma2_q), _fmt(c),
            _fmt(cfg.seed), "ok",
        ]

    rows = _map_tasks(one, [float(t) for t in sorted(cfg.taus)], threads)
    return header, rows


def _rows_optimize(cfg: RunConfig, threads: int) -> tuple[list[str], list[list[str]]]:
    header = ["tau", "k", "T", "sigma2_lo", "sigma2_q", "c_running",
              "iterations", "converged", "state", "seed", "status"]
    w0sq = cfg.noise.omega0**2
    taus = [float(t) for t in sorted(cfg.taus)]
    child_seeds = np.random.SeedSequence(cfg.seed).spawn(len(taus))

    def one(item) -> list[str]:
        i, tau = item
        seed_i = int(child_seeds[i].generate_state(1)[0])
        try:
            scan = optimize_interrogation(
                cfg.noise, cfg.atoms, tau, cfg.k_max,
                probe=cfg.probe_kind, dim_cap=cfg.dim_cap, on_cap="clamp",
                seed=seed_i, family=cfg.probe_family,
            )
        except DimensionCapError as exc:
            return [_fmt(tau)] + [""] * 8 + [f"skipped: {exc}"]
        best = min(scan.evaluations, key=lambda e: e.sigma2_q)
        rep = best.report
        c = scan.sigma2_q * w0sq * tau
        return [
            _fmt(tau), _fmt(scan.k_opt), _fmt(scan.T_opt),
            _fmt(scan.sigma2_lo), _fmt(scan.sigma2_q), _fmt(c),
            _fmt(rep.iterations if rep else 0),
            _fmt(bool(rep.converged) if rep else False),
            _fmt_state(rep.state) if rep is not None else "",
            _fmt(cfg.seed), "ok",
        ]

    rows = _map_tasks(one, list(enumerate(taus)), threads)
    return header, rows


def _rows_simulate(cfg: RunConfig, threads: int) -> tuple[list[str], list[list[str]]]:
    header = ["tau", "k", "T", "avar", "stderr", "n_pairs", "n_runs", "seed", "status"]
    sim = SimConfig(noise=cfg.noise, n_atoms=cfg.atoms, T=cfg.sim_T,
                    n_steps=cfg.n_steps, servo=cfg.servo)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_runs)
    traces = _map_tasks(
        lambda s: simulate_clock(sim, int(s.generate_state(1)[0])), list(seeds), threads
    )
    rows = []
    for tau in sorted(cfg.taus):
        k = int(round(tau / cfg.sim_T))
        ests = [avar_estimate(tr, k, overlapping=True) for tr in traces]
        vals = np.array([e.avar for e in ests])
        rows.append([
            _fmt(float(tau)), _fmt(k), _fmt(cfg.sim_T),
            _fmt(float(vals.mean())),
            _fmt(float(vals.std(ddof=1) / np.sqrt(cfg.n_runs))),
            _fmt(int(sum(e.n_pairs for e in ests))),
            _fmt(cfg.n_runs), _fmt(cfg.seed), "ok",
        ])
    return header, rows


def _rows_bound_check(cfg: RunConfig, threads: int) -> tuple[list[str], list[list[str]]]:
    from .clock import bound_check

    header = ["tau", "k", "T", "avar", "stderr", "sigma2_q", "violation",
              "seed", "status"]
    sim = SimConfig(noise=cfg.noise, n_atoms=cfg.atoms, T=cfg.sim_T,
                    n_steps=cfg.n_steps, servo=cfg.servo)
    taus = sorted(float(t) for t in cfg.taus)
    ok_taus = [
        t for t in taus
        if (cfg.atoms + 1) ** (2 * int(round(t / cfg.sim_T)) - 1) <= cfg.dim_cap
    ]
    rows_by_tau = {}
    if ok_taus:
        report = bound_check(sim, _fixed_probe(cfg), ok_taus, cfg.n_runs,
                             cfg.seed, dim_cap=cfg.dim_cap)
        for r in report.rows:
            rows_by_tau[r.tau] = [
                _fmt(r.tau), _fmt(r.k), _fmt(cfg.sim_T), _fmt(r.avar),
                _fmt(r.stderr), _fmt(r.sigma2_q), _fmt(r.violation),
                _fmt(cfg.seed), "ok",
            ]
    rows = []
    for t in taus:
        if t in rows_by_tau:
            rows.append(rows_by_tau[t])
        else:
            k = int(round(t / cfg.sim_T))
            dim = (cfg.atoms + 1) ** (2 * k - 1)
            rows.append([_fmt(t), _fmt(k), _fmt(cfg.sim_T), "", "", "", "",
                         _fmt(cfg.seed),
                         f"skipped: k={k} needs joint dimension {dim} > cap {cfg.dim_cap}"])
    return header, rows


def run(cfg: RunConfig, threads: int = 1) -> int:
    """Execute a validated run and write the CSV. Returns the exit code."""
    dispatch = {
        "lo-avar": _rows_lo_avar,
        "bound": _rows_bound,
        "optimize": _rows_optimize,
        "simulate": _rows_simulate,
        "bound-check": _rows_bound_check,
    }
    try:
        header, rows = dispatch[cfg.mode](cfg, threads)
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    for row in rows:
        for tok in row:
            if tok in ("nan", "inf", "-inf"):
                print(f"numerical failure: non-finite value in output row {row}",
                      file=sys.stderr)
                return EXIT_NUMERICAL

    canonical = json.dumps(cfg.canonical(), sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    lines = [
        f"# qavar {__version__}",
        f"# config-hash {digest}",
        f"# seed {cfg.seed}",
        ",".join(header),
    ]
    for row in rows:
        lines.append(",".join(_csv_escape(tok) for tok in row))
    with open(cfg.out, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")

    n_ok = sum(1 for row in rows if row[-1] == "ok")
    if rows and n_ok == 0:
        print(f"all {len(rows)} rows skipped by the dimension cap", file=sys.stderr)
        return EXIT_RESOURCE
    return EXIT_OK


def _csv_escape(tok: str) -> str:
    if any(ch in tok for ch in ',"\n'):
        return '"' + tok.replace('"', '""') + '"'
    return tok


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="qavar",
        description="Quantum Allan variance bounds and clock-servo simulation.",
    )
    parser.add_argument("mode", choices=MODES, help="computation to run")
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--out", default=None, help="output CSV path")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except OSError as exc:
        print(f"config: cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"config: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        cfg = validate(doc, mode_override=args.mode, seed_override=args.seed,
                       out_override=args.out)
    except CliConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return EXIT_VALIDATION

    if args.threads < 1:
        print("--threads: must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION

    code = run(cfg, threads=args.threads)
    if code == EXIT_OK:
        print(f"wrote {cfg.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
