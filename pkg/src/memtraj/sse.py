"""Exact joint-state integrator under continuous quadrature measurement.

The plant and every lossy intermediate mode are kept in the state vector,
so the conditional evolution is Markovian here and serves as the ground
truth that the reduced description must reproduce.  One Euler-Maruyama
step applies

    d|psi> = -i H |psi> dt
             - [ W'W + s W - s^2/4 ] |psi> dt
             - i sqrt(1/2) (2 W - s) |psi> dW,      W = sum_k sqrt(gamma_k) a_k,

with s = <W - W'> recomputed from the current normalized state, followed
by explicit renormalization.  The measured quadrature record is

    y dt = -i s dt + dW / sqrt(2),

which is real because s is purely imaginary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hilbert as hs
from .errors import DimensionError, NumericalFailure
from .noise import MeasurementRecord, WienerPath

# Pre-normalization norm outside this window aborts the run: the step size
# is far too large for the rates involved.
NORM_WINDOW = (0.5, 1.5)


@dataclass(frozen=True)
class SseModel:
    """Immutable joint model: plant + lossy bosonic modes + probe rates.

    ``h_total`` and the lifted mode operators are precomputed so stepping
    is a handful of mat-vecs.  ``bosonic_labels`` names the subsystems
    whose top-level population is reported as truncation leakage.
    """

    space: hs.Space
    h_plant: np.ndarray
    bath_frequencies: tuple[float, ...]
    couplings: tuple[float, ...]
    probe_rates: tuple[float, ...]
    coupling_op: np.ndarray
    h_total: np.ndarray = field(repr=False)
    bath_ops: tuple[np.ndarray, ...] = field(repr=False)
    meas_op: np.ndarray = field(repr=False)
    bosonic_labels: tuple[tuple[str, int], ...] = ()
    name: str = "custom"


def _assemble(space, h_plant, bath_frequencies, couplings, probe_rates,
              coupling_op, bosonic_labels, name):
    n_modes = len(space.dims) - 1
    if not (len(bath_frequencies) == len(couplings) == len(probe_rates) == n_modes):
        raise DimensionError("one frequency, coupling and probe rate per mode is required")
    if any(g < 0 for g in probe_rates):
        raise ValueError("probe rates must be >= 0")
    d_plant = space.dims[0]
    if h_plant.shape != (d_plant, d_plant) or coupling_op.shape != (d_plant, d_plant):
        raise DimensionError("plant operators must match the plant dimension")

    h_total = space.embed(h_plant, 0)
    bath_ops = []
    l_joint = space.embed(coupling_op, 0)
    for k in range(n_modes):
        a_k = space.embed(hs.destroy(space.dims[k + 1]), k + 1)
        bath_ops.append(a_k)
        h_total = h_total + bath_frequencies[k] * (hs.dagger(a_k) @ a_k)
        h_total = h_total + couplings[k] * (l_joint @ hs.dagger(a_k)
                                            + hs.dagger(l_joint) @ a_k)
    meas_op = sum(math.sqrt(g) * a for g, a in zip(probe_rates, bath_ops))
    if n_modes == 0:
        meas_op = np.zeros((space.total, space.total), dtype=complex)
    return SseModel(
        space=space,
        h_plant=h_plant,
        bath_frequencies=tuple(float(v) for v in bath_frequencies),
        couplings=tuple(float(v) for v in couplings),
        probe_rates=tuple(float(v) for v in probe_rates),
        coupling_op=coupling_op,
        h_total=h_total,
        bath_ops=tuple(bath_ops),
        meas_op=meas_op,
        bosonic_labels=tuple(bosonic_labels),
        name=name,
    )


def build_atom_cavity(omega_q, delta, g, gamma, n_cavity):
    """Two-level plant exchanging excitations with one monitored mode."""
    if n_cavity < 2:
        raise DimensionError(f"cavity truncation must be >= 2, got {n_cavity}")
    space = hs.Space((2, n_cavity))
    h_plant = 0.5 * omega_q * hs.sigma_z()
    return _assemble(space, h_plant, (delta,), (g,), (gamma,), hs.sigma_minus(),
                     bosonic_labels=(("cavity", 1),), name="atom_cavity")


def build_linear_optomech(omega_m, delta, g_prime, gamma, mass, n_mech, n_cavity):
    """Harmonic plant with position coupling to one monitored mode."""
    if n_mech < 2 or n_cavity < 2:
        raise DimensionError("oscillator truncations must be >= 2")
    space = hs.Space((n_mech, n_cavity))
    x, p = hs.position_momentum(n_mech, mass, omega_m)
    h_plant = p @ p / (2.0 * mass) + 0.5 * mass * omega_m**2 * (x @ x)
    return _assemble(space, h_plant, (delta,), (g_prime,), (gamma,), x,
                     bosonic_labels=(("mech", 0), ("cavity", 1)),
                     name="linear_optomech")


def build_quadratic_optomech(omega_m, delta, g, gamma, n_mech, n_cavity):
    """Harmonic plant coupled through its squared normalized position."""
    if n_mech < 2 or n_cavity < 2:
        raise DimensionError("oscillator truncations must be >= 2")
    space = hs.Space((n_mech, n_cavity))
    h_plant = omega_m * (hs.number(n_mech) + 0.5 * hs.identity(n_mech))
    x_norm = hs.normalized_position(n_mech)
    return _assemble(space, h_plant, (delta,), (g,), (gamma,), x_norm @ x_norm,
                     bosonic_labels=(("mech", 0), ("cavity", 1)),
                     name="quadratic_optomech")


def sse_increment(model, psi, dW, dt):
    """Raw state increment and record sample for one step (no renormalization)."""
    u = model.meas_op @ psi
    w = np.vdot(psi, u)
    s = w - np.conj(w)  # <W - W'>, purely imaginary
    dpsi = (-1j * (model.h_total @ psi)
            - (hs.dagger(model.meas_op) @ u + s * u - 0.25 * s * s * psi)) * dt
    dpsi += -1j * math.sqrt(0.5) * (2.0 * u - s * psi) * dW
    y = float((-1j * s).real) + dW / (math.sqrt(2.0) * dt)
    return dpsi, y


def sse_step(model, psi, dW, dt):
    """One normalized step; returns the new state and the record sample y."""
    psi_new, y, _ = _step_tracked(model, psi, dW, dt, t=None)
    return psi_new, y


def _step_tracked(model, psi, dW, dt, t):
    dpsi, y = sse_increment(model, psi, dW, dt)
    psi_new = psi + dpsi
    norm = float(np.linalg.norm(psi_new))
    if not np.isfinite(norm):
        raise NumericalFailure("joint state produced non-finite amplitudes", t=t)
    if not NORM_WINDOW[0] < norm < NORM_WINDOW[1]:
        raise NumericalFailure(
            f"pre-normalization norm {norm:.3g} outside {NORM_WINDOW}; reduce dt", t=t)
    return psi_new / norm, y, abs(norm - 1.0)


@dataclass(frozen=True)
class Trajectory:
    """Sampled conditional means plus the full measurement record.

    ``drift`` holds the largest pre-normalization norm (or trace)
    deviation seen in each inter-sample window; ``leakage`` the top-level
    population of each truncated mode at the sample times.
    """

    times: np.ndarray
    means: dict[str, np.ndarray]
    record: MeasurementRecord
    drift: np.ndarray
    leakage: dict[str, np.ndarray]


def _sample_indices(n_steps, stride):
    ks = list(range(0, n_steps + 1, max(1, int(stride))))
    if ks[-1] != n_steps:
        ks.append(n_steps)
    return ks


def run_sse(model, psi0, path, observables, sample_stride=1):
    """Iterate the stepper along ``path``, sampling every ``sample_stride`` steps.

    ``observables`` maps names to joint-space operators; conditional means
    are stored as complex series.  A zero-length path yields the single
    initial sample.
    """
    psi = np.asarray(psi0, dtype=complex)
    if psi.shape != (model.space.total,):
        raise DimensionError(
            f"initial state length {psi.shape} does not match space {model.space.dims}")
    norm0 = float(np.linalg.norm(psi))
    if abs(norm0 - 1.0) > 1e-9:
        raise ValueError(f"initial state norm {norm0} is not 1")

    n = path.n_steps if path is not None else 0
    dt = path.dt if path is not None else 0.0
    ks = _sample_indices(n, sample_stride)
    n_samples = len(ks)

    means = {name: np.empty(n_samples, dtype=complex) for name in observables}
    leakage = {label: np.empty(n_samples, dtype=float) for label, _ in model.bosonic_labels}
    drift = np.zeros(n_samples, dtype=float)
    y_series = np.empty(n, dtype=float)

    def take_sample(slot, k):
        for name, op in observables.items():
            means[name][slot] = hs.expectation(op, psi)
        for label, sub in model.bosonic_labels:
            leakage[label][slot] = hs.top_level_population(psi, model.space.dims, sub)

    take_sample(0, 0)
    slot = 1
    window_drift = 0.0
    for k in range(n):
        psi, y, dev = _step_tracked(model, psi, path.increments[k], dt, t=k * dt)
        y_series[k] = y
        window_drift = max(window_drift, dev)
        if slot < n_samples and k + 1 == ks[slot]:
            take_sample(slot, k + 1)
            drift[slot] = window_drift
            window_drift = 0.0
            slot += 1

    times = np.array([k * dt for k in ks])
    record = MeasurementRecord(times=np.arange(n) * dt, y=y_series)
    return Trajectory(times=times, means=means, record=record, drift=drift,
                      leakage=leakage)


def atom_plant_vector(plant_state="plus_x"):
    """Named qubit states in the {|e>, |g>} basis."""
    states = {
        "plus_x": np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0),
        "plus_y": np.array([1.0, 1.0j], dtype=complex) / math.sqrt(2.0),
        "excited": np.array([1.0, 0.0], dtype=complex),
        "ground": np.array([0.0, 1.0], dtype=complex),
    }
    if plant_state not in states:
        raise ValueError(f"unknown plant state {plant_state!r}; pick one of {sorted(states)}")
    return states[plant_state]


def atom_initial_state(model, plant_state="plus_x"):
    """Default product state: chosen qubit state with every mode in vacuum."""
    psi = atom_plant_vector(plant_state)
    for d in model.space.dims[1:]:
        psi = np.kron(psi, hs.basis(d, 0))
    return psi


def oscillator_initial_state(model, alpha=1.0):
    """Coherent plant state (displaced oscillator) with modes in vacuum."""
    psi = hs.coherent(model.space.dims[0], alpha)
    for d in model.space.dims[1:]:
        psi = np.kron(psi, hs.basis(d, 0))
    return psi


def plant_vector_initial_state(model, plant_vec):
    """Arbitrary normalized plant vector with every mode in vacuum."""
    psi = np.asarray(plant_vec, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    for d in model.space.dims[1:]:
        psi = np.kron(psi, hs.basis(d, 0))
    return psi


def atom_observables(model):
    """Joint-space Bloch components plus the cavity photon number."""
    sp = model.space
    return {
        "sigma_x": sp.embed(hs.sigma_x(), 0),
        "sigma_y": sp.embed(hs.sigma_y(), 0),
        "sigma_z": sp.embed(hs.sigma_z(), 0),
        "n_cavity": sp.embed(hs.number(sp.dims[1]), 1),
    }


def optomech_observables(model, mass, omega_m):
    sp = model.space
    x, p = hs.position_momentum(sp.dims[0], mass, omega_m)
    return {
        "x": sp.embed(x, 0),
        "p": sp.embed(p, 0),
        "n_mech": sp.embed(hs.number(sp.dims[0]), 0),
        "n_cavity": sp.embed(hs.number(sp.dims[1]), 1),
    }


def phonon_observables(model):
    sp = model.space
    x_norm = hs.normalized_position(sp.dims[0])
    return {
        "n_mech": sp.embed(hs.number(sp.dims[0]), 0),
        "x_sq": sp.embed(x_norm @ x_norm, 0),
        "n_cavity": sp.embed(hs.number(sp.dims[1]), 1),
    }
