"""Scenario runners: trajectories, Fock-state scans, echoes and ensemble references."""
from __future__ import annotations

import csv
import json
import logging
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy

import fockdyn
from fockdyn.dynamics import loschmidt_echo, spectral_decompose
from fockdyn.entanglement import default_sites
from fockdyn.ensemble import (EnsembleSpec, ensemble_mutual_information,
                              ensemble_subsystem_entropy, omega)
from fockdyn.errors import ConfigError, FockDynError
from fockdyn.experiments.config import ExperimentConfig
from fockdyn.fock import FockBasis, enumerate_sector
from fockdyn.lattice import ModelSpec, with_site_potential
from fockdyn.operators import (bond_current_operator, build_hamiltonian,
                               local_phase_unitary)
from fockdyn.protocol import Protocol, Pulse, Trajectory, initial_vector, run_protocol

log = logging.getLogger(__name__)

SCAN_CHUNK = 25


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from None


class IOFailure(FockDynError, OSError):
    exit_code = 4


def envelope(times, values, window: float):
    """Centered sliding-window maximum and minimum of a time series."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValueError("envelope needs a time-sorted series")
    if not window > 0:
        raise ValueError("envelope window must be positive")
    half = window / 2.0
    lo = np.searchsorted(times, times - half - 1e-12, side="left")
    hi = np.searchsorted(times, times + half + 1e-12, side="right")
    upper = np.array([values[a:b].max() for a, b in zip(lo, hi)])
    lower = np.array([values[a:b].min() for a, b in zip(lo, hi)])
    return upper, lower


# --- Fock-state scans ------------------------------------------------------

@dataclass
class ScanResult:
    """Observables after each erasure step for every initial Fock state.

    ``table`` has shape ``(n_states, n_steps, n_observables)``.
    """

    observables: list[str]
    table: np.ndarray
    initial_states: list[str]
    group_key: np.ndarray
    group_label: str
    perturbed: str

    @property
    def n_steps(self) -> int:
        return self.table.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.table[:, :, self.observables.index(name)]

    def std(self) -> np.ndarray:
        return self.table.std(axis=0)

    def mean(self) -> np.ndarray:
        return self.table.mean(axis=0)

    def pooled_std(self, prefix: str, exclude=()) -> np.ndarray:
        cols = [k for k, o in enumerate(self.observables)
                if o.startswith(prefix) and o not in exclude]
        return np.sqrt(np.mean(self.std()[:, cols] ** 2, axis=1))

    def group_stats(self):
        """``{key: (count, mean[step, obs], std[step, obs])}`` per initial occupation."""
        out = {}
        for key in (0, 1):
            sel = self.group_key == key
            if sel.any():
                sub = self.table[sel]
                out[key] = (int(sel.sum()), sub.mean(axis=0), sub.std(axis=0))
        return out


def _scan_chunk(args):
    W, observables, start, stop, dim, n_max = args
    occ_values, currents = observables
    P = np.zeros((dim, stop - start), dtype=complex)
    P[np.arange(start, stop), np.arange(stop - start)] = 1.0
    out = np.empty((stop - start, n_max + 1, len(occ_values) + len(currents)))
    for k in range(n_max + 1):
        prob = np.abs(P) ** 2
        out[:, k, :len(occ_values)] = (occ_values @ prob).T
        for c, J in enumerate(currents):
            out[:, k, len(occ_values) + c] = np.real(np.sum(P.conj() * (J @ P), axis=0))
        if k < n_max:
            P = W @ P
    return out


def fock_scan(model: ModelSpec, counts, op_params: dict, spread_time: float, n_max: int,
              group: dict | None = None, workers: int = 1, basis: FockBasis | None = None,
              eig=None) -> ScanResult:
    """Run ``[O+ O(t)]^k`` from every Fock state of the sector, k = 0..n_max."""
    basis = basis or enumerate_sector(model, counts)
    if basis.dim == 0:
        raise ConfigError("scan needs a non-empty sector")
    eig = eig or spectral_decompose(build_hamiltonian(model, basis))
    O = local_phase_unitary(basis, op_params["site"], op_params["species"],
                            op_params["strength"], op_params["duration"])
    U = eig.propagator(spread_time)
    # one erasure step O+ exp(iHt) O exp(-iHt) as a dense matrix
    W = (O.adjoint().values[:, None] * U.conj().T) @ (O.values[:, None] * U)

    pert_site = op_params["site"]
    pert_species = op_params["species"]
    names, occ_rows = [], []
    for lab in model.labels:
        k = model.species_index(lab)
        for s in model.accessible_sites(lab):
            if (s, lab) != (pert_site, pert_species):
                names.append(f"n_{s}_{lab}")
                occ_rows.append(basis.occupations[:, k, s])
    names.append(f"n_{pert_site}_{pert_species}")
    occ_rows.append(basis.occupations[:, model.species_index(pert_species), pert_site])
    currents = []
    mobile = tuple(lab for lab in model.labels if lab != "phi") or model.labels
    for a, b in model.lattice.edges:
        if not any((a, b) in model.get_species(lab).allowed_edges for lab in mobile):
            continue
        names.append(f"J_{a}_{b}")
        currents.append(bond_current_operator(basis, (a, b), mobile).toarray())
    occ_values = np.array(occ_rows, dtype=float)

    chunks = [(W, (occ_values, currents), a, min(a + SCAN_CHUNK, basis.dim), basis.dim, n_max)
              for a in range(0, basis.dim, SCAN_CHUNK)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_scan_chunk, chunks))
    else:
        parts = [_scan_chunk(c) for c in chunks]
    table = np.concatenate(parts, axis=0)

    group = group or {"site": pert_site, "species": pert_species}
    gk = basis.occupations[:, model.species_index(group["species"]), int(group["site"])]
    return ScanResult(names, table, [c.to_string(model) for c in basis],
                      np.asarray(gk, dtype=int), f"n_{group['site']}_{group['species']}",
                      f"n_{pert_site}_{pert_species}")


def write_scan(result: ScanResult, out: Path, name: str) -> list[Path]:
    steps = range(result.n_steps)
    raw = out / f"{name}_scan_raw.csv"
    write_csv(raw, ["state", "initial", "step"] + result.observables,
              ([s, result.initial_states[s], k] + list(result.table[s, k])
               for s in range(result.table.shape[0]) for k in steps))
    std = result.std()
    pooled_n = result.pooled_std("n_", exclude=(result.perturbed,))
    has_j = any(o.startswith("J_") for o in result.observables)
    pooled_j = result.pooled_std("J_") if has_j else np.zeros(result.n_steps)
    stats = out / f"{name}_scan_stats.csv"
    write_csv(stats, ["step"] + [f"std_{o}" for o in result.observables]
              + ["pooled_std_n", "pooled_std_J"],
              ([k] + list(std[k]) + [pooled_n[k], pooled_j[k]] for k in steps))
    groups = out / f"{name}_scan_groups.csv"
    g = result.group_stats()
    header = ["step", "group", "count"] + [f"mean_{o}" for o in result.observables] \
        + [f"std_{o}" for o in result.observables]
    write_csv(groups, header,
              ([k, f"{result.group_label}={key}", cnt] + list(m[k]) + list(s[k])
               for k in steps for key, (cnt, m, s) in g.items()))
    return [raw, stats, groups]


# --- trajectories ----------------------------------------------------------

def _operators(cfg: ExperimentConfig, basis: FockBasis) -> dict:
    return {lab: local_phase_unitary(basis, **p) for lab, p in cfg.operators.items()}


def run_trajectory(cfg: ExperimentConfig, basis=None, eig=None) -> Trajectory:
    basis = basis or enumerate_sector(cfg.model, cfg.counts)
    eig = eig or spectral_decompose(build_hamiltonian(cfg.model, basis))
    return run_protocol(cfg.model, cfg.counts, cfg.initial, cfg.protocol, cfg.diagnostics,
                        operators=_operators(cfg, basis), hamiltonians={"H": eig}, basis=basis)


def without_pulses(protocol: Protocol) -> Protocol:
    segs = tuple(replace(s, strength=0.0) if isinstance(s, Pulse) else s
                 for s in protocol.segments)
    return replace(protocol, segments=segs)


def trajectory_table(traj: Trajectory, cfg: ExperimentConfig, baseline: Trajectory | None = None):
    header = ["time"] + (["step"] if traj.has_steps else [])
    cols = {}
    for c in traj.columns:
        cols[c] = traj[c]
    if baseline is not None:
        for c in baseline.columns:
            cols[f"ref_{c}"] = baseline[c]
    if cfg.envelope is not None and not traj.has_steps:
        window = float(cfg.envelope.get("window", 10.0))
        for c in list(cfg.envelope.get("columns", traj.columns)):
            for name in (c, f"ref_{c}"):
                if name in cols:
                    up, low = envelope(traj.times, cols[name], window)
                    cols[f"{name}_upper"], cols[f"{name}_lower"] = up, low
    header += list(cols)
    rows = []
    for r in range(len(traj)):
        row = [traj.times[r]] + ([traj.steps[r]] if traj.has_steps else [])
        row += [cols[c][r] for c in cols]
        rows.append(row)
    return header, rows


def _metadata(cfg: ExperimentConfig, wall: float, files, extra=None) -> dict:
    meta = {
        "name": cfg.name,
        "model_sha256": cfg.model.digest(),
        "model": cfg.model.to_dict(),
        "counts": dict(zip(cfg.model.labels, cfg.counts)),
        "parameters": cfg.raw,
        "versions": {"fockdyn": fockdyn.__version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "wall_time_s": wall,
        "files": [str(f.name) for f in files],
    }
    if extra:
        meta.update(extra)
    return meta


def _write_meta(path: Path, meta: dict):
    try:
        path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from None


def _outdir(cfg: ExperimentConfig, out) -> Path:
    path = Path(out if out is not None else cfg.output)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create output directory {path}: {exc}") from None
    return path


def run_experiment(cfg: ExperimentConfig, out=None, workers: int | None = None) -> dict:
    """Run the trajectory of a config (and its scan, if present) and write outputs.

    Returns ``{"files": [...], "trajectory": Trajectory, "scan": ScanResult|None}``.
    """
    t0 = time.perf_counter()
    outdir = _outdir(cfg, out)
    basis = enumerate_sector(cfg.model, cfg.counts)
    eig = spectral_decompose(build_hamiltonian(cfg.model, basis))
    files = []
    traj = run_trajectory(cfg, basis, eig)
    base = None
    if cfg.baseline:
        base = run_protocol(cfg.model, cfg.counts, cfg.initial, without_pulses(cfg.protocol),
                            cfg.diagnostics, operators=_operators(cfg, basis),
                            hamiltonians={"H": eig}, basis=basis)
    header, rows = trajectory_table(traj, cfg, base)
    csv_path = outdir / f"{cfg.name}.csv"
    write_csv(csv_path, header, rows)
    files.append(csv_path)
    scan = None
    if cfg.scan is not None:
        scan = run_scan(cfg, basis=basis, eig=eig, workers=workers or cfg.workers)
        files += write_scan(scan, outdir, cfg.name)
    extra = {"ensemble": ensemble_report(cfg, basis, eig)} if cfg.diagnostics else {}
    meta_path = outdir / f"{cfg.name}.meta.json"
    files.append(meta_path)
    _write_meta(meta_path, _metadata(cfg, time.perf_counter() - t0, files, extra))
    log.info("wrote %s", ", ".join(str(f) for f in files))
    return {"files": files, "trajectory": traj, "baseline": base, "scan": scan}


def run_scan(cfg: ExperimentConfig, n_max: int | None = None, workers: int | None = None,
             basis=None, eig=None) -> ScanResult:
    if cfg.scan is None:
        raise ConfigError("config has no 'scan' section")
    sc = cfg.scan
    return fock_scan(cfg.model, cfg.counts, cfg.operators[sc["operator"]],
                     float(sc["spread_time"]), int(sc["n_max"] if n_max is None else n_max),
                     sc.get("group"), workers=workers or cfg.workers, basis=basis, eig=eig)


def scan_experiment(cfg: ExperimentConfig, out=None, n_max=None, workers=None) -> list[Path]:
    t0 = time.perf_counter()
    outdir = _outdir(cfg, out)
    result = run_scan(cfg, n_max, workers)
    files = write_scan(result, outdir, cfg.name)
    meta = outdir / f"{cfg.name}_scan.meta.json"
    files.append(meta)
    _write_meta(meta, _metadata(cfg, time.perf_counter() - t0, files, {"n_max": result.n_steps - 1}))
    return files


def echo_experiment(cfg: ExperimentConfig, out=None):
    """Loschmidt echo against the configured site-potential perturbation."""
    t0 = time.perf_counter()
    echo = cfg.echo or {"perturbation": {"site": 1, "species": "tau", "potential": 1.0},
                        "times": np.round(np.arange(0, 501) * 0.5, 12)}
    pert = echo["perturbation"]
    basis = enumerate_sector(cfg.model, cfg.counts)
    eig = spectral_decompose(build_hamiltonian(cfg.model, basis))
    perturbed = with_site_potential(cfg.model, int(pert["site"]), pert["species"],
                                    float(pert["potential"]))
    eig_p = spectral_decompose(build_hamiltonian(perturbed, basis))
    times = np.asarray(echo["times"], dtype=float)
    L = loschmidt_echo(eig, eig_p, initial_vector(basis, cfg.initial), times)
    outdir = _outdir(cfg, out)
    path = outdir / f"{cfg.name}_echo.csv"
    write_csv(path, ["time", "echo"], zip(times, L))
    meta = outdir / f"{cfg.name}_echo.meta.json"
    _write_meta(meta, _metadata(cfg, time.perf_counter() - t0, [path, meta],
                                {"perturbation": pert, "min_echo": float(L.min())}))
    return times, L, [path, meta]


def ensemble_report(cfg: ExperimentConfig, basis=None, eig=None) -> dict:
    """Reference entropies and MI for both ensemble readings."""
    basis = basis or enumerate_sector(cfg.model, cfg.counts)
    eig = eig or spectral_decompose(build_hamiltonian(cfg.model, basis))
    psi0 = initial_vector(basis, cfg.initial)
    center = cfg.ensemble.get("center")
    center = eig.energy(psi0) if center is None else float(center)
    delta = float(cfg.ensemble.get("delta_e", 0.5))
    subsets = cfg.ensemble.get("subsets")
    if subsets is None:
        subsets = [list(d.sites) for d in cfg.diagnostics if d.kind == "entropy"] or [[0]]
    specs = {"sector_uniform": EnsembleSpec("sector_uniform"),
             "energy_window": EnsembleSpec("energy_window", center, delta)}
    report = {}
    sites = default_sites(basis)
    for name, spec in specs.items():
        try:
            entry = {"omega": omega(basis, eig, spec)}
        except ConfigError as exc:
            report[name] = {"error": str(exc)}
            continue
        entry["entropy"] = {"-".join(map(str, A)): ensemble_subsystem_entropy(basis, spec, A, eig)
                            for A in subsets}
        pairs = [ensemble_mutual_information(basis, spec, i, j, eig)
                 for k, i in enumerate(sites) for j in sites[k + 1:]]
        entry["mi_mean"] = float(np.mean(pairs))
        entry["mi_std"] = float(np.std(pairs))
        if name == "energy_window":
            entry["center"] = center
            entry["delta_e"] = delta
        report[name] = entry
    return report
