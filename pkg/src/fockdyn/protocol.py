"""Timelines of evolution segments, pulses and spread-operator applications.

The clock advances through ``Evolve`` (by ``|duration|``) and ``Pulse``
segments; ``SpreadOp`` and ``Sequence`` act instantaneously.  A forward
evolution of 250, a pulse of 20 and a backward evolution of 250 therefore
span the timeline 0-250, 250-270, 270-520.  During a pulse the Hamiltonian is
off and only the local phase accumulates, so snapshots inside the window are
exact as well.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence as Seq, Union

import numpy as np

from fockdyn.diagnostics import parse_diagnostics
from fockdyn.dynamics import apply_spread_operator, check_norm, evolve_many, spectral_decompose
from fockdyn.errors import ConfigError, InvariantViolation
from fockdyn.fock import FockBasis, FockConfiguration, enumerate_sector, fock_index
from fockdyn.lattice import ModelSpec
from fockdyn.operators import DiagonalOperator, build_hamiltonian, number_operator

TIME_EPS = 1e-9
ENERGY_TOL = 1e-8
NUMBER_TOL = 1e-10
DEFAULT_STEP = 0.5


@dataclass(frozen=True)
class Evolve:
    duration: float
    hamiltonian: str = "H"


@dataclass(frozen=True)
class Pulse:
    site: int
    species: str
    strength: float
    duration: float


@dataclass(frozen=True)
class SpreadOp:
    operator: str
    spread_time: float


@dataclass(frozen=True)
class Sequence:
    """``repetitions`` applications of ``[O+ O(t)]``, recorded after every step."""

    operator: str
    spread_time: float
    repetitions: int


Segment = Union[Evolve, Pulse, SpreadOp, Sequence]


@dataclass(frozen=True)
class Protocol:
    segments: tuple = ()
    samples: tuple | None = None
    step: float = DEFAULT_STEP

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for seg in self.segments:
            for name in ("duration", "spread_time", "strength"):
                v = getattr(seg, name, 0.0)
                if not np.isfinite(v):
                    raise ConfigError(f"non-finite {name} in {seg}")
            if isinstance(seg, Pulse) and seg.duration < 0:
                raise ConfigError(f"pulse duration must be non-negative: {seg}")
            if isinstance(seg, Sequence) and seg.repetitions < 0:
                raise ConfigError(f"sequence repetitions must be non-negative: {seg}")
        if self.samples is not None:
            s = tuple(float(v) for v in self.samples)
            if any(b < a for a, b in zip(s, s[1:])):
                raise ConfigError("sample times must be non-decreasing")
            object.__setattr__(self, "samples", s)
        if not self.step > 0:
            raise ConfigError("sample step must be positive")

    @property
    def total_time(self) -> float:
        return sum(_span(seg) for seg in self.segments)

    def sample_times(self) -> np.ndarray:
        if self.samples is not None:
            return np.array(self.samples, dtype=float)
        grid = []
        clock = 0.0
        for seg in self.segments:
            span = _span(seg)
            if span > 0:
                n = int(np.floor(span / self.step + 1e-9))
                grid.extend(clock + self.step * np.arange(n + 1))
                grid.append(clock + span)
            clock += span
        if not grid:
            if any(isinstance(s, Sequence) for s in self.segments):
                return np.zeros(0)
            return np.zeros(1)
        grid = np.round(np.array(grid), 12)
        return np.unique(grid)


def _span(seg) -> float:
    if isinstance(seg, Evolve):
        return abs(float(seg.duration))
    if isinstance(seg, Pulse):
        return float(seg.duration)
    return 0.0


@dataclass
class Trajectory:
    basis: FockBasis
    times: np.ndarray
    steps: list
    states: np.ndarray
    data: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return list(self.data)

    @property
    def has_steps(self) -> bool:
        return any(s is not None for s in self.steps)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, column: str) -> np.ndarray:
        return self.data[column]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def initial_vector(basis: FockBasis, initial) -> np.ndarray:
    if isinstance(initial, np.ndarray):
        psi = np.array(initial, dtype=complex)
        if psi.shape != (basis.dim,):
            raise ConfigError("initial vector does not match the basis")
        return psi
    psi = np.zeros(basis.dim, dtype=complex)
    if isinstance(initial, FockConfiguration):
        psi[fock_index(basis, initial)] = 1.0
    else:
        psi[int(initial)] = 1.0
    return psi


class _Recorder:
    def __init__(self, basis, samples, hamiltonians, check):
        self.basis = basis
        self.samples = samples
        self.pos = 0
        self.times, self.steps, self.states = [], [], []
        self.check = check
        self.counts = np.array(basis.counts, dtype=float)
        self.occ = basis.occupations.sum(axis=2).astype(float)

    def add(self, t, step, states):
        states = np.atleast_2d(states)
        if self.check:
            for s in states:
                check_norm(s, f"at t={t}")
            # per-species particle number: sum_i <n_i> over the batch
            numbers = np.abs(states) ** 2 @ self.occ
            if np.max(np.abs(numbers - self.counts)) > NUMBER_TOL:
                raise InvariantViolation(f"particle number drifted at t={t}")
        self.times.extend(np.broadcast_to(t, len(states)))
        self.steps.extend([step] * len(states) if not isinstance(step, list) else step)
        self.states.extend(states)

    def pending_until(self, t_end):
        start = self.pos
        while self.pos < len(self.samples) and self.samples[self.pos] <= t_end + TIME_EPS:
            self.pos += 1
        return self.samples[start:self.pos]


def run_protocol(model: ModelSpec, counts, initial, protocol: Protocol,
                 observers: Seq = (), operators: dict | None = None,
                 hamiltonians: dict | None = None, basis: FockBasis | None = None,
                 check: bool = True) -> Trajectory:
    """Run a timeline and evaluate ``observers`` at every recorded snapshot.

    ``operators`` maps labels used by ``SpreadOp``/``Sequence`` to operators
    on the sector; ``hamiltonians`` maps ``Evolve`` labels to eigensystems
    (``"H"`` defaults to the model Hamiltonian).
    """
    basis = basis or enumerate_sector(model, counts)
    diags = parse_diagnostics(observers)
    hamiltonians = dict(hamiltonians or {})
    operators = dict(operators or {})
    for seg in protocol.segments:
        if isinstance(seg, Evolve) and seg.hamiltonian not in hamiltonians:
            if seg.hamiltonian != "H":
                raise ConfigError(f"unresolved hamiltonian label {seg.hamiltonian!r}")
            hamiltonians["H"] = spectral_decompose(build_hamiltonian(model, basis))
        if isinstance(seg, (SpreadOp, Sequence)) and seg.operator not in operators:
            raise ConfigError(f"unresolved operator label {seg.operator!r}")
        if isinstance(seg, (SpreadOp, Sequence)) and "H" not in hamiltonians:
            hamiltonians["H"] = spectral_decompose(build_hamiltonian(model, basis))
        if isinstance(seg, Pulse):
            model.species_index(seg.species)
    if "H" not in hamiltonians and any(d.kind == "energy" for d in diags):
        hamiltonians["H"] = spectral_decompose(build_hamiltonian(model, basis))

    samples = protocol.sample_times()
    if len(samples) and samples[0] < -TIME_EPS:
        raise ConfigError(f"sample time {samples[0]} precedes the timeline")
    if len(samples) and samples[-1] > protocol.total_time + TIME_EPS:
        raise ConfigError(
            f"sample time {samples[-1]} outside the timeline [0, {protocol.total_time}]")

    psi0 = initial_vector(basis, initial)
    rec = _Recorder(basis, samples, hamiltonians, check)
    state = psi0
    clock = 0.0
    for seg in protocol.segments:
        span = _span(seg)
        if isinstance(seg, Evolve):
            eig = hamiltonians[seg.hamiltonian]
            ts = rec.pending_until(clock + span)
            sign = 1.0 if seg.duration >= 0 else -1.0
            if len(ts):
                snaps = evolve_many(eig, state, sign * (ts - clock))
                if check:
                    e0 = eig.energy(state)
                    drift = np.abs(np.abs(snaps @ eig.vectors.conj()) ** 2 @ eig.energies - e0)
                    if drift.max() > ENERGY_TOL * max(eig.norm, 1.0):
                        raise InvariantViolation(f"energy drift {drift.max():.3e} during {seg}")
                rec.add(ts, None, snaps)
            state = evolve_many(eig, state, [sign * span])[0]
        elif isinstance(seg, Pulse):
            n = number_operator(basis, seg.site, seg.species).values
            ts = rec.pending_until(clock + span)
            if len(ts):
                phases = np.exp(-1j * seg.strength * np.outer(ts - clock, n))
                rec.add(ts, None, phases * state[None, :])
            state = np.exp(-1j * seg.strength * seg.duration * n) * state
        else:
            ts = rec.pending_until(clock)
            if len(ts):
                rec.add(ts, None, np.repeat(state[None, :], len(ts), axis=0))
            eig = hamiltonians["H"]
            op = operators[seg.operator]
            if isinstance(seg, SpreadOp):
                state = apply_spread_operator(eig, op, seg.spread_time, state)
            else:
                if isinstance(op, DiagonalOperator) and not op.is_unitary(1e-9):
                    raise InvariantViolation(f"sequence operator {seg.operator!r} is not unitary")
                dag = op.adjoint() if isinstance(op, DiagonalOperator) else None
                rows = [state]
                for _ in range(seg.repetitions):
                    state = apply_spread_operator(eig, op, seg.spread_time, state)
                    state = dag.apply(state) if dag is not None else op.matrix.conj().T @ state
                    rows.append(state)
                rec.add(clock, list(range(seg.repetitions + 1)), np.array(rows))
        clock += span
    ts = rec.pending_until(clock)
    if len(ts):
        rec.add(ts, None, np.repeat(state[None, :], len(ts), axis=0))
    if rec.pos < len(samples):
        raise ConfigError(f"sample time {samples[rec.pos]} outside the timeline")

    states = np.array(rec.states).reshape(len(rec.states), basis.dim)
    traj = Trajectory(basis, np.array(rec.times, dtype=float), rec.steps, states)
    eig = hamiltonians.get("H")
    for d in diags:
        traj.data.update(d.evaluate(basis, states, eig, psi0))
    return traj
