"""Experiment configuration: a single JSON document resolved into a run plan.

Top-level keys (only ``model`` and ``initial`` are required)::

    name          run name, used for output file names
    model         {"preset": "ring", "length", "hopping", "interaction",
                   "phi": {"attach_site", "J_phi", "U_tau_phi"}}
                  or an explicit {"lattice", "species", "interactions"} section
    sector        {"tau": 3, "ups": 3}; defaults to the counts of ``initial``
    initial       "|111000>_tau x |111000>_ups"
    operators     {"O": {"kind": "phase", "site", "species", "strength", "duration"}}
    protocol      {"segments": [...], "samples": [...] | {"start", "stop", "step"},
                   "step": 0.5, "baseline": false}
    diagnostics   [{"kind": "entropy", "sites": [0, 1, 2]}, {"kind": "mi_stats"}, ...]
    envelope      {"window": 10.0, "columns": [...]}
    ensemble      {"kind": "sector_uniform" | "energy_window", "delta_e": 0.5,
                   "center": null, "subsets": [[0], [0, 1]]}
    echo          {"perturbation": {"site", "species", "potential"},
                   "times": {"start", "stop", "step"}}
    scan          {"operator": "O", "spread_time": 50, "n_max": 40,
                   "group": {"site": 1, "species": "tau"}}
    output        output directory
    workers       worker processes for scans

Segment kinds: ``evolve`` {duration, hamiltonian}, ``pulse`` {site, species,
strength, duration}, ``spread_op`` {operator, t}, ``sequence`` {operator, t,
repetitions}.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from fockdyn.diagnostics import Diagnostic, parse_diagnostics
from fockdyn.errors import ConfigError, FockDynError
from fockdyn.fock import FockConfiguration, parse_state
from fockdyn.lattice import ModelSpec, phi_extended_model, ring_model
from fockdyn.protocol import DEFAULT_STEP, Evolve, Protocol, Pulse, Sequence, SpreadOp

BUNDLED = ("fig2", "fig3a", "fig3c", "fig3d", "fig4")
TOP_KEYS = {"name", "description", "model", "sector", "initial", "operators", "protocol",
            "diagnostics", "envelope", "ensemble", "echo", "scan", "output", "workers"}


@dataclass
class ExperimentConfig:
    name: str
    model: ModelSpec
    counts: tuple[int, ...]
    initial: FockConfiguration
    protocol: Protocol
    diagnostics: list[Diagnostic]
    operators: dict = field(default_factory=dict)
    ensemble: dict = field(default_factory=dict)
    envelope: dict | None = None
    echo: dict | None = None
    scan: dict | None = None
    baseline: bool = False
    output: str = "out"
    workers: int = 1
    raw: dict = field(default_factory=dict)


def _field(path: str, exc: Exception) -> ConfigError:
    return ConfigError(f"{path}: {exc}")


def _grid(spec, path: str) -> np.ndarray:
    if isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except (KeyError, TypeError, ValueError) as exc:
            raise _field(path, exc) from None
        if step <= 0 or stop < start:
            raise ConfigError(f"{path}: need step > 0 and stop >= start")
        n = int(np.floor((stop - start) / step + 1e-9))
        return np.round(start + step * np.arange(n + 1), 12)
    if isinstance(spec, list):
        return np.array([float(v) for v in spec])
    raise ConfigError(f"{path}: expected a list of times or {{start, stop, step}}")


def parse_model(data: dict) -> ModelSpec:
    if not isinstance(data, dict):
        raise ConfigError("model: expected an object")
    try:
        if data.get("preset") == "ring":
            model = ring_model(int(data.get("length", 6)), data.get("hopping", 1.0),
                               float(data.get("interaction", -0.05)))
        elif "preset" in data:
            raise ConfigError(f"model.preset: unknown preset {data['preset']!r}")
        else:
            model = ModelSpec.from_dict(data)
        phi = data.get("phi")
        if phi is not None:
            model = phi_extended_model(model, int(phi.get("attach_site", 1)),
                                       float(phi.get("J_phi", 3.0)),
                                       float(phi.get("U_tau_phi", -0.7)))
    except ConfigError:
        raise
    except FockDynError as exc:
        raise ConfigError(f"model: {exc}") from None
    return model


def _segment(seg: dict, path: str):
    try:
        kind = seg["kind"]
        if kind == "evolve":
            return Evolve(float(seg["duration"]), seg.get("hamiltonian", "H"))
        if kind == "pulse":
            return Pulse(int(seg["site"]), str(seg["species"]), float(seg["strength"]),
                         float(seg["duration"]))
        if kind == "spread_op":
            return SpreadOp(str(seg["operator"]), float(seg["t"]))
        if kind == "sequence":
            return Sequence(str(seg["operator"]), float(seg["t"]), int(seg["repetitions"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise _field(path, f"missing or invalid field {exc}") from None
    raise ConfigError(f"{path}.kind: unknown segment kind {seg.get('kind')!r}")


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "model" not in data or "initial" not in data:
        raise ConfigError("config needs 'model' and 'initial'")
    model = parse_model(data["model"])
    try:
        initial = parse_state(str(data["initial"]), model)
    except FockDynError as exc:
        raise ConfigError(f"initial: {exc}") from None
    counts = initial.counts()
    if "sector" in data:
        sector = data["sector"]
        try:
            counts = tuple(int(sector.get(lab, 0)) for lab in model.labels)
        except (AttributeError, TypeError, ValueError) as exc:
            raise _field("sector", exc) from None
        if set(sector) - set(model.labels):
            raise ConfigError(f"sector: unknown species {sorted(set(sector) - set(model.labels))}")
        if counts != initial.counts():
            raise ConfigError(f"sector: initial state has counts {initial.counts()}, not {counts}")

    operators = {}
    for label, op in (data.get("operators") or {}).items():
        path = f"operators.{label}"
        if not isinstance(op, dict) or op.get("kind") != "phase":
            raise ConfigError(f"{path}: only kind 'phase' operators are supported")
        try:
            operators[label] = dict(site=int(op["site"]), species=str(op["species"]),
                                    strength=float(op["strength"]), duration=float(op["duration"]))
            model.species_index(operators[label]["species"])
        except (KeyError, TypeError, ValueError, FockDynError) as exc:
            raise _field(path, exc) from None

    proto = data.get("protocol") or {}
    segments = [_segment(s, f"protocol.segments[{k}]")
                for k, s in enumerate(proto.get("segments", []))]
    for k, seg in enumerate(segments):
        if isinstance(seg, (SpreadOp, Sequence)) and seg.operator not in operators:
            raise ConfigError(f"protocol.segments[{k}].operator: unresolved label {seg.operator!r}")
        if isinstance(seg, Evolve) and seg.hamiltonian != "H":
            raise ConfigError(f"protocol.segments[{k}].hamiltonian: unresolved label {seg.hamiltonian!r}")
        if isinstance(seg, Pulse) and seg.species not in model.labels:
            raise ConfigError(f"protocol.segments[{k}].species: unknown species {seg.species!r}")
    samples = proto.get("samples")
    samples = None if samples is None else tuple(_grid(samples, "protocol.samples"))
    protocol = Protocol(tuple(segments), samples, float(proto.get("step", DEFAULT_STEP)))
    if samples and samples[-1] > protocol.total_time + 1e-9:
        raise ConfigError(f"protocol.samples: {samples[-1]} lies outside the timeline "
                          f"[0, {protocol.total_time}]")

    diagnostics = parse_diagnostics(data.get("diagnostics", []))

    ens = dict(data.get("ensemble") or {})
    ens.setdefault("kind", "sector_uniform")
    ens.setdefault("delta_e", 0.5)

    env = data.get("envelope")
    if env is not None:
        if not isinstance(env, dict) or float(env.get("window", 10.0)) <= 0:
            raise ConfigError("envelope.window must be positive")

    echo = data.get("echo")
    if echo is not None:
        try:
            pert = echo.get("perturbation", {"site": 1, "species": "tau", "potential": 1.0})
            model.species_index(pert["species"])
            echo = {"perturbation": pert,
                    "times": _grid(echo.get("times", {"start": 0, "stop": 250, "step": 0.5}),
                                   "echo.times")}
        except (KeyError, TypeError, AttributeError, FockDynError) as exc:
            raise _field("echo", exc) from None

    scan = data.get("scan")
    if scan is not None:
        if scan.get("operator") not in operators:
            raise ConfigError(f"scan.operator: unresolved label {scan.get('operator')!r}")
        scan = dict(scan)
        scan.setdefault("spread_time", 50.0)
        scan.setdefault("n_max", 40)
        scan.setdefault("group", {"site": operators[scan["operator"]]["site"],
                                  "species": operators[scan["operator"]]["species"]})

    workers = data.get("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers: must be a positive integer")

    return ExperimentConfig(
        name=str(data.get("name", "experiment")), model=model, counts=counts,
        initial=initial, protocol=protocol, diagnostics=diagnostics, operators=operators,
        ensemble=ens, envelope=env, echo=echo, scan=scan,
        baseline=bool(proto.get("baseline", False)),
        output=str(data.get("output", "out")), workers=workers, raw=data)


def load_raw(source: str) -> dict:
    """Read a config from a path or a bundled name such as ``fig2``."""
    if source in BUNDLED:
        text = resources.files("fockdyn.experiments").joinpath(f"configs/{source}.json").read_text()
        where = f"<bundled {source}>"
    else:
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {source!r}: {exc}") from None
        where = str(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{where}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_config(source: str) -> ExperimentConfig:
    return parse_config(load_raw(source))
