"""Reduced conditional density-matrix steppers with memory functions.

After the lossy intermediate modes are eliminated, the plant state obeys

    d rho = -i [H_p, rho] dt
            - sum_k g_k ([L', vr_k] - [L, vr_k']) dt
            - sum_k sqrt(2 gamma_k) (vr_k + vr_k' - Tr{vr_k + vr_k'} rho) dW,

    y dt  = - sum_k sqrt(gamma_k) Tr{vr_k + vr_k'} dt + dW / sqrt(2),

where each memory super-operator vr_k acts on rho as a sum of
pre * rho * post sandwiches (:class:`MemoryTerm`).  The signs of the dW
coupling and of the record mean are fixed by requiring that the reduced
equation be the exact partial trace of the joint-state equation driven by
the *same* dW realization; flipping dW -> -dW gives the equally valid
mirrored unravelling, but then shared-noise cross-validation against the
joint integrator would fail pathwise.

Three closed forms are provided: the two-level plant (vr = f sigma_minus
rho with a scalar Riccati f), the position-coupled oscillator (vr built
from the rescaled quadruple in :mod:`memtraj.riccati`), and the
weak-coupling phonon stepper.  The general first-order memory kernel is
also available as an explicit time integral for arbitrary plant
operators.

All steppers accept density matrices with leading batch axes, which is
what makes large ensemble averages cheap.  Scheme: Euler-Maruyama on rho
(coefficients at the pre-step state), deterministic RK4 on the auxiliary
functions, re-Hermitization and trace renormalization after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from . import hilbert as hs
from .errors import DimensionError, NumericalFailure
from .noise import MeasurementRecord, WienerPath, ensemble_increments
from .riccati import (
    F1_SINGULARITY_EPS,
    AtomRiccatiParams,
    OptomechParams,
    OptomechRiccatiState,
    atom_riccati_rhs,
    atom_riccati_step,
    optomech_riccati_step,
)
from .sse import Trajectory, _sample_indices

# Pre-normalization trace outside 1 +/- this window aborts the run.
TRACE_WINDOW = 1e-3

_SM = hs.sigma_minus()
_SP = hs.sigma_plus()
_SZ = hs.sigma_z()
_PE = _SP @ _SM  # excited-state projector


def _bdag(m):
    return np.conj(np.swapaxes(m, -1, -2))


def _btrace(m):
    return np.trace(m, axis1=-2, axis2=-1)


def _col(s):
    """Append two singleton axes so a scalar series multiplies matrices."""
    return np.asarray(s)[..., None, None]


@dataclass(frozen=True)
class MemoryTerm:
    """One sandwich contribution  weight * pre @ rho @ post."""

    pre: np.ndarray
    post: np.ndarray
    weight: complex = 1.0 + 0.0j


def apply_memory_terms(terms, rho):
    """Assemble the memory operator sum_j w_j pre_j rho post_j."""
    out = None
    for term in terms:
        piece = term.weight * (term.pre @ rho @ term.post)
        out = piece if out is None else out + piece
    if out is None:
        return np.zeros_like(rho)
    return out


@dataclass(frozen=True)
class SmeState:
    """Plant density matrix plus whatever auxiliary functions close it."""

    rho: np.ndarray
    aux: object = None
    t: float = 0.0


def _renormalize(rho, t=None):
    """Re-Hermitize and rescale the trace to one; guard against blow-up."""
    if not np.all(np.isfinite(rho)):
        raise NumericalFailure("density matrix produced non-finite entries", t=t)
    rho = 0.5 * (rho + _bdag(rho))
    tr = np.real(_btrace(rho))
    if np.max(np.abs(tr - 1.0)) > TRACE_WINDOW:
        raise NumericalFailure(
            f"pre-normalization trace strayed {np.max(np.abs(tr - 1.0)):.3g} from 1;"
            " reduce dt", t=t)
    return rho / _col(tr)


def _trace_drift(rho_raw):
    """Largest |Tr rho - 1| before renormalization (batched max)."""
    return float(np.max(np.abs(np.real(_btrace(rho_raw)) - 1.0)))


def general_sme_increment(rho, memory_channels, coupling_op, h_plant, dW, dt):
    """Raw increment and record sample of the general reduced equation.

    ``memory_channels`` holds one (g_k, gamma_k, terms) triple per eliminated
    mode.  Modes with g_k = 0 contribute no drift and modes with
    gamma_k = 0 contribute neither noise nor record, exactly.
    """
    drift = -1j * (h_plant @ rho - rho @ h_plant)
    noise = np.zeros_like(rho)
    y_mean = 0.0
    l_dag = _bdag(coupling_op)
    for g_k, gamma_k, terms in memory_channels:
        vr = apply_memory_terms(terms, rho)
        vr_dag = _bdag(vr)
        if g_k != 0.0:
            drift = drift - g_k * ((l_dag @ vr - vr @ l_dag)
                                   - (coupling_op @ vr_dag - vr_dag @ coupling_op))
        if gamma_k != 0.0:
            trace_term = 2.0 * np.real(_btrace(vr))
            noise = noise - math.sqrt(2.0 * gamma_k) * (vr + vr_dag - _col(trace_term) * rho)
            y_mean = y_mean - math.sqrt(gamma_k) * trace_term
    drho = drift * dt + noise * np.asarray(dW)[..., None, None]
    y = y_mean + np.asarray(dW) / (math.sqrt(2.0) * dt)
    return drho, y


def general_sme_step(rho, memory_channels, coupling_op, h_plant, dW, dt, t=None):
    """One normalized step of the general reduced equation."""
    drho, y = general_sme_increment(rho, memory_channels, coupling_op, h_plant, dW, dt)
    return _renormalize(rho + drho, t=t), y


# ---------------------------------------------------------------------------
# Two-level plant specialization
# ---------------------------------------------------------------------------

def atom_sme_increment(rho, f, params, dW, dt):
    """Increment of the two-level conditional equation with memory f.

    Batched over any leading axes shared by rho, f and dW.
    """
    f = np.asarray(f, dtype=complex)
    h_eff = 0.5 * params.omega_q * _SZ + params.g * _col(f.imag) * _PE
    comm = h_eff @ rho - rho @ h_eff
    relax = _PE @ rho + rho @ _PE - 2.0 * (_SM @ rho @ _SP)
    m_op = _col(f) * (_SM @ rho) + _col(np.conj(f)) * (rho @ _SP)
    trace_term = np.real(_btrace(m_op))
    drift = -1j * comm - params.g * _col(f.real) * relax
    noise = -math.sqrt(2.0 * params.gamma) * (m_op - _col(trace_term) * rho)
    drho = drift * dt + noise * np.asarray(dW)[..., None, None]
    y = -math.sqrt(params.gamma) * trace_term + np.asarray(dW) / (math.sqrt(2.0) * dt)
    return drho, y


def atom_sme_step(state, params, dW, dt):
    """Advance (rho, f) one step; returns the new state and record sample."""
    drho, y = atom_sme_increment(state.rho, state.aux, params, dW, dt)
    rho_new = _renormalize(state.rho + drho, t=state.t)
    f_new = atom_riccati_step(state.aux, params, dt)
    return SmeState(rho=rho_new, aux=f_new, t=state.t + dt), y


def atom_memory_terms(f):
    """The explicit sandwich form vr = f sigma_minus rho of the atom memory."""
    return [MemoryTerm(pre=_SM, post=np.eye(2, dtype=complex), weight=complex(f))]


def _atom_master_rhs(rho, f, params):
    h_eff = 0.5 * params.omega_q * _SZ + params.g * _col(np.asarray(f).imag) * _PE
    relax = _PE @ rho + rho @ _PE - 2.0 * (_SM @ rho @ _SP)
    return -1j * (h_eff @ rho - rho @ h_eff) - params.g * _col(np.asarray(f).real) * relax


def atom_master_step(rho, f, params, dt, frozen_f=False):
    """One RK4 step of the ensemble-averaged (deterministic) equation.

    The memory function is advanced internally to the RK4 substages so the
    combined (rho, f) system is integrated at fourth order; pass
    ``frozen_f=True`` for the fixed-f short-memory comparison equation.
    """
    def f_at(fi, h):
        return fi if frozen_f else fi + h

    k1f = 0.0 if frozen_f else atom_riccati_rhs(f, params)
    k1 = _atom_master_rhs(rho, f, params)
    f2 = f_at(f, 0.5 * dt * k1f)
    k2f = 0.0 if frozen_f else atom_riccati_rhs(f2, params)
    k2 = _atom_master_rhs(rho + 0.5 * dt * k1, f2, params)
    f3 = f_at(f, 0.5 * dt * k2f)
    k3f = 0.0 if frozen_f else atom_riccati_rhs(f3, params)
    k3 = _atom_master_rhs(rho + 0.5 * dt * k2, f3, params)
    f4 = f_at(f, dt * k3f)
    k4 = _atom_master_rhs(rho + dt * k3, f4, params)
    rho_new = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _renormalize(rho_new)


# ---------------------------------------------------------------------------
# Position-coupled oscillator specialization
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _oscillator_ops(n, mass, omega_m):
    x, p = hs.position_momentum(n, mass, omega_m)
    h_plant = p @ p / (2.0 * mass) + 0.5 * mass * omega_m**2 * (x @ x)
    return x, p, h_plant, hs.identity(n)


def optomech_memory_terms(aux, n, params):
    """Sandwich form of the oscillator memory operator.

    vr = (f1 rho A' + A rho) / (1 - |f1|^2) with A = g0 + gx x + fp p.
    """
    x, p, _, eye = _oscillator_ops(n, params.mass, params.omega_m)
    denom = 1.0 - abs(aux.f1) ** 2
    if denom <= F1_SINGULARITY_EPS:
        raise NumericalFailure("memory function f1 reached the singular surface |f1| = 1",
                               t=aux.t)
    a_op = aux.g0 * eye + aux.gx * x + aux.fp * p
    return [
        MemoryTerm(pre=a_op, post=eye, weight=1.0 / denom),
        MemoryTerm(pre=eye, post=_bdag(a_op), weight=aux.f1 / denom),
    ]


def optomech_sme_increment(rho, aux, params, dW, dt):
    """Increment, record sample and trace term for the oscillator equation."""
    n = rho.shape[-1]
    x, _, h_plant, _ = _oscillator_ops(n, params.mass, params.omega_m)
    terms = optomech_memory_terms(aux, n, params)
    vr = apply_memory_terms(terms, rho)
    trace_term = float(np.real(_btrace(vr)) * 2.0)
    drho, y = general_sme_increment(
        rho, [(params.g_prime, params.gamma, terms)], x, h_plant, dW, dt)
    return drho, y, trace_term


def optomech_sme_step(state, params, dW, dt):
    """Advance (rho, quadruple) one step; returns the new state and y."""
    drho, y, trace_term = optomech_sme_increment(state.rho, state.aux, params, dW, dt)
    rho_new = _renormalize(state.rho + drho, t=state.t)
    aux_new = optomech_riccati_step(state.aux, params, trace_term, dW, dt)
    return SmeState(rho=rho_new, aux=aux_new, t=state.t + dt), y


# ---------------------------------------------------------------------------
# Weak-coupling memory kernel and the phonon stepper
# ---------------------------------------------------------------------------

def weak_coupling_memory_terms(coupling_op, h_plant, bath, couplings, t,
                         quadrature_steps=64, quad_tol=1e-8):
    """First-order memory operators as explicit time integrals.

    ``bath`` is a sequence of (frequency_or_detuning, probe_rate) pairs and
    ``couplings`` the matching g_k list; all g_k must be below their
    gamma_k for the first-order kernel to be meaningful.  For mode k the
    returned term realizes

        vr_k = [ sum_k' int_0^t dtau (e^{-i M tau})_{kk'} g_k' L(-tau) ] rho

    with M = diag(frequencies) - i sqrt(outer(rates, rates)) and
    L(-tau) = e^{-i H_p tau} L e^{i H_p tau}.  The integral is composite
    Simpson; a Richardson half-grid estimate above ``quad_tol`` raises.
    """
    freqs = np.array([b[0] for b in bath], dtype=float)
    rates = np.array([b[1] for b in bath], dtype=float)
    gs = np.asarray(couplings, dtype=float)
    if freqs.size != gs.size:
        raise DimensionError("one coupling per bath mode is required")
    if np.any(gs >= rates):
        raise ValueError("first-order kernel requires g_k < gamma_k for every mode")
    if quadrature_steps < 16:
        raise ValueError("quadrature_steps must be >= 16")

    n_modes = freqs.size
    d = h_plant.shape[0]
    eye = hs.identity(d)
    if t == 0.0:
        return [MemoryTerm(pre=np.zeros((d, d), dtype=complex), post=eye)
                for _ in range(n_modes)]

    m_mat = np.diag(freqs).astype(complex) - 1j * np.sqrt(np.outer(rates, rates))
    energies, vecs = np.linalg.eigh(h_plant)
    l_tilde = hs.dagger(vecs) @ coupling_op @ vecs

    def kernels(n_nodes):
        h = t / n_nodes
        weights = np.ones(n_nodes + 1)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        weights *= h / 3.0
        out = np.zeros((n_modes, d, d), dtype=complex)
        for j, w in enumerate(weights):
            tau = j * h
            phase = np.exp(-1j * np.outer(energies, np.ones(d)) * tau
                           + 1j * np.outer(np.ones(d), energies) * tau)
            l_minus_tau = vecs @ (l_tilde * phase) @ hs.dagger(vecs)
            prop = expm(-1j * m_mat * tau) @ gs
            for k in range(n_modes):
                out[k] += w * prop[k] * l_minus_tau
        return out

    n_fine = int(quadrature_steps)
    n_fine += n_fine % 2
    fine = kernels(n_fine)
    coarse = kernels(n_fine // 2)
    err = float(np.max(np.abs(fine - coarse))) / 15.0
    if err > quad_tol:
        raise NumericalFailure(
            f"memory-kernel quadrature did not converge (estimate {err:.3g} > {quad_tol:g});"
            " increase quadrature_steps")
    return [MemoryTerm(pre=fine[k], post=eye) for k in range(n_modes)]


@lru_cache(maxsize=8)
def _phonon_ops(n):
    num = hs.number(n)
    x_norm = hs.normalized_position(n)
    return num, x_norm @ x_norm


def phonon_sme_increment(rho, omega_m, g_eff, dW, dt):
    """Increment of the weak-coupling phonon-readout equation.

    Drift carries the double commutator -g_eff [X^2, [N, rho]], which is
    not of Lindblad form in N: measuring energy this way feeds two-phonon
    transitions back into the oscillator.
    """
    if g_eff < 0:
        raise ValueError(f"g_eff must be >= 0, got {g_eff}")
    n = rho.shape[-1]
    num, x_sq = _phonon_ops(n)
    comm_n = num @ rho - rho @ num
    drift = -1j * omega_m * comm_n - g_eff * (x_sq @ comm_n - comm_n @ x_sq)
    mean_n = np.real(_btrace(num @ rho))
    noise = -math.sqrt(2.0 * g_eff) * (num @ rho + rho @ num - 2.0 * _col(mean_n) * rho)
    drho = drift * dt + noise * np.asarray(dW)[..., None, None]
    y = -2.0 * math.sqrt(g_eff) * mean_n + np.asarray(dW) / (math.sqrt(2.0) * dt)
    return drho, y


def phonon_sme_step(rho, omega_m, g_eff, dW, dt, t=None):
    drho, y = phonon_sme_increment(rho, omega_m, g_eff, dW, dt)
    return _renormalize(rho + drho, t=t), y


def phonon_memory_channels(rho_dim, g_eff):
    """(g_k, gamma_k, terms) triple that makes the general stepper reproduce
    the phonon equation exactly: vr = N rho with g = gamma = g_eff."""
    num, _ = _phonon_ops(rho_dim)
    return [(g_eff, g_eff, [MemoryTerm(pre=num, post=hs.identity(rho_dim))])]


# ---------------------------------------------------------------------------
# Trajectory runners
# ---------------------------------------------------------------------------

def _run_conditional(step, state0, path, observables, sample_stride,
                     leakage_label=None):
    """Shared sampling loop; ``step`` returns (state, y, pre-norm drift)."""
    n = path.n_steps if path is not None else 0
    dt = path.dt if path is not None else 0.0
    ks = _sample_indices(n, sample_stride)
    n_samples = len(ks)

    state = state0
    means = {name: np.empty(n_samples, dtype=complex) for name in observables}
    leak_keys = [leakage_label] if leakage_label else []
    leakage = {key: np.empty(n_samples, dtype=float) for key in leak_keys}
    drift = np.zeros(n_samples, dtype=float)
    y_series = np.empty(n, dtype=float)

    def take_sample(slot):
        for name, op in observables.items():
            means[name][slot] = hs.expectation(op, state.rho)
        if leakage_label:
            dim = state.rho.shape[-1]
            leakage[leakage_label][slot] = float(np.real(state.rho[dim - 1, dim - 1]))

    take_sample(0)
    slot = 1
    window = 0.0
    for k in range(n):
        state, y, dev = step(state, path.increments[k], dt)
        y_series[k] = y
        window = max(window, dev)
        if slot < n_samples and k + 1 == ks[slot]:
            take_sample(slot)
            drift[slot] = window
            window = 0.0
            slot += 1

    times = np.array([k * dt for k in ks])
    record = MeasurementRecord(times=np.arange(n) * dt, y=y_series)
    return Trajectory(times=times, means=means, record=record, drift=drift,
                      leakage=leakage)


def run_atom_sme(params, rho0, path, sample_stride=1):
    """Conditional Bloch trajectory of the two-level reduced equation."""
    hs.check_density_matrix(rho0)
    observables = {"sigma_x": hs.sigma_x(), "sigma_y": hs.sigma_y(),
                   "sigma_z": hs.sigma_z()}
    state0 = SmeState(rho=np.asarray(rho0, dtype=complex), aux=0.0 + 0.0j, t=0.0)

    def step(state, dW, dt):
        drho, y = atom_sme_increment(state.rho, state.aux, params, dW, dt)
        raw = state.rho + drho
        dev = _trace_drift(raw)
        new = SmeState(rho=_renormalize(raw, t=state.t),
                       aux=atom_riccati_step(state.aux, params, dt),
                       t=state.t + dt)
        return new, y, dev

    return _run_conditional(step, state0, path, observables, sample_stride)


def run_optomech_sme(params, rho0, path, sample_stride=1):
    """Conditional quadrature trajectory of the oscillator reduced equation."""
    hs.check_density_matrix(rho0)
    n = rho0.shape[0]
    x, p, _, _ = _oscillator_ops(n, params.mass, params.omega_m)
    observables = {"x": x, "p": p, "n_mech": hs.number(n)}
    state0 = SmeState(rho=np.asarray(rho0, dtype=complex),
                      aux=OptomechRiccatiState(), t=0.0)

    def step(state, dW, dt):
        drho, y, trace_term = optomech_sme_increment(state.rho, state.aux,
                                                     params, dW, dt)
        raw = state.rho + drho
        dev = _trace_drift(raw)
        new = SmeState(rho=_renormalize(raw, t=state.t),
                       aux=optomech_riccati_step(state.aux, params, trace_term,
                                                 dW, dt),
                       t=state.t + dt)
        return new, y, dev

    return _run_conditional(step, state0, path, observables, sample_stride,
                            leakage_label="mech")


def run_phonon_sme(omega_m, g_eff, rho0, path, sample_stride=1):
    """Conditional phonon-number trajectory of the weak-coupling equation."""
    hs.check_density_matrix(rho0)
    n = rho0.shape[0]
    num, x_sq = _phonon_ops(n)
    observables = {"n_mech": num, "x_sq": x_sq}
    state0 = SmeState(rho=np.asarray(rho0, dtype=complex), aux=None, t=0.0)

    def step(state, dW, dt):
        drho, y = phonon_sme_increment(state.rho, omega_m, g_eff, dW, dt)
        raw = state.rho + drho
        dev = _trace_drift(raw)
        return SmeState(rho=_renormalize(raw, t=state.t), aux=None,
                        t=state.t + dt), y, dev

    return _run_conditional(step, state0, path, observables, sample_stride,
                            leakage_label="mech")


@dataclass(frozen=True)
class MasterSolution:
    """Deterministic (record-averaged) solution samples."""

    times: np.ndarray
    rhos: np.ndarray
    f: np.ndarray


def run_atom_master(params, rho0, dt, n_steps, sample_stride=1, frozen_f=None):
    """Integrate the averaged two-level equation with RK4.

    ``frozen_f`` pins the memory function to a constant (the short-memory
    comparison); otherwise f evolves from 0 alongside rho.
    """
    hs.check_density_matrix(rho0)
    ks = _sample_indices(n_steps, sample_stride)
    rho = np.asarray(rho0, dtype=complex)
    f = complex(frozen_f) if frozen_f is not None else 0.0 + 0.0j
    frozen = frozen_f is not None

    rhos = np.empty((len(ks), 2, 2), dtype=complex)
    fs = np.empty(len(ks), dtype=complex)
    rhos[0], fs[0] = rho, f
    slot = 1
    for k in range(n_steps):
        rho = atom_master_step(rho, f, params, dt, frozen_f=frozen)
        if not frozen:
            f = atom_riccati_step(f, params, dt)
        if slot < len(ks) and k + 1 == ks[slot]:
            rhos[slot], fs[slot] = rho, f
            slot += 1
    times = np.array([k * dt for k in ks])
    return MasterSolution(times=times, rhos=rhos, f=fs)


# ---------------------------------------------------------------------------
# Ensemble averaging
# ---------------------------------------------------------------------------

class AtomSmeKernel:
    """Batched stepper protocol for ensemble runs of the two-level equation."""

    def __init__(self, params):
        self.params = params

    def initial_aux(self, n_traj):
        return np.zeros(n_traj, dtype=complex)

    def step(self, rho, aux, dW, dt):
        drho, y = atom_sme_increment(rho, aux, self.params, dW, dt)
        rho_new = _renormalize(rho + drho)
        return rho_new, atom_riccati_step(aux, self.params, dt), y


@dataclass(frozen=True)
class EnsembleResult:
    """Trajectory-averaged state with per-element standard errors."""

    times: np.ndarray
    mean: np.ndarray
    se_real: np.ndarray
    se_imag: np.ndarray
    n_traj: int


def ensemble_average(kernel, rho0, n_traj, base_seed, t_grid, chunk_size=2000,
                     sample_stride=1):
    """Average ``n_traj`` independently seeded conditional trajectories.

    Trajectory i always draws its increments from the seed derived for
    index i, and partial sums accumulate into pre-indexed chunk slots, so
    the result depends only on the arguments, not on batching or
    execution order.  Statistics are collected every ``sample_stride``
    steps (plus the endpoints).
    """
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    t_grid = np.asarray(t_grid, dtype=float)
    n_steps = t_grid.size - 1
    if n_steps < 1:
        raise ValueError("t_grid needs at least two points")
    steps = np.diff(t_grid)
    dt = steps[0]
    wiggle = 64.0 * np.finfo(float).eps * max(1.0, abs(float(t_grid[-1])))
    if dt <= 0 or not np.allclose(steps, dt, rtol=0.0, atol=wiggle):
        raise ValueError("t_grid must be uniform with positive spacing")

    d = rho0.shape[-1]
    ks = _sample_indices(n_steps, sample_stride)
    slot_of = {k: slot for slot, k in enumerate(ks)}
    n_samples = len(ks)
    starts = list(range(0, n_traj, chunk_size))
    sums = np.zeros((len(starts), n_samples, d, d), dtype=complex)
    sq_re = np.zeros((len(starts), n_samples, d, d), dtype=float)
    sq_im = np.zeros((len(starts), n_samples, d, d), dtype=float)

    for c, start in enumerate(starts):
        m = min(chunk_size, n_traj - start)
        dws = ensemble_increments(base_seed, m, n_steps, dt, first_index=start)
        rho = np.broadcast_to(rho0.astype(complex), (m, d, d)).copy()
        aux = kernel.initial_aux(m)

        def accumulate(slot, rho_now):
            sums[c, slot] += rho_now.sum(axis=0)
            sq_re[c, slot] += (rho_now.real**2).sum(axis=0)
            sq_im[c, slot] += (rho_now.imag**2).sum(axis=0)

        accumulate(0, rho)
        for k in range(n_steps):
            rho, aux, _ = kernel.step(rho, aux, dws[:, k], dt)
            slot = slot_of.get(k + 1)
            if slot is not None:
                accumulate(slot, rho)

    total = sums.sum(axis=0)
    total_sq_re = sq_re.sum(axis=0)
    total_sq_im = sq_im.sum(axis=0)
    mean = total / n_traj
    if n_traj > 1:
        var_re = (total_sq_re - n_traj * mean.real**2) / (n_traj - 1)
        var_im = (total_sq_im - n_traj * mean.imag**2) / (n_traj - 1)
        se_real = np.sqrt(np.maximum(var_re, 0.0) / n_traj)
        se_imag = np.sqrt(np.maximum(var_im, 0.0) / n_traj)
    else:
        se_real = np.zeros_like(total_sq_re)
        se_imag = np.zeros_like(total_sq_im)
    return EnsembleResult(times=t_grid[ks], mean=mean, se_real=se_real,
                          se_imag=se_imag, n_traj=n_traj)
