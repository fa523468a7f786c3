"""Shared-noise agreement between the joint-state and reduced routes.

These are the decisive physics checks: both integrators see the same
Wiener increments and must produce the same conditional story, and the
memory operator extracted from the joint state must match its closed
form built from the auxiliary functions.
"""

import numpy as np
import pytest

from memtraj import hilbert as hs
from memtraj import sme, sse
from memtraj.noise import WienerPath
from memtraj.riccati import (AtomRiccatiParams, OptomechParams,
                             OptomechRiccatiState, atom_riccati_evolve,
                             optomech_riccati_step)

import oracles

BENCH = AtomRiccatiParams(omega_q=1.0, delta=1.0, gamma=2.0, g=1.0)


def test_atom_conditional_means_track_on_shared_noise():
    model = sse.build_atom_cavity(1.0, 1.0, 1.0, 2.0, 16)
    psi0 = sse.atom_initial_state(model, "plus_x")
    path = WienerPath.generate(3000, 1e-3, 42)
    traj_joint = sse.run_sse(model, psi0, path, sse.atom_observables(model), 10)
    rho0 = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
    traj_red = sme.run_atom_sme(BENCH, rho0, path, sample_stride=10)
    dist = oracles.bloch_distance(traj_joint.means, traj_red.means)
    assert dist.max() < 0.03
    # records agree pathwise, not only in distribution
    assert np.max(np.abs(traj_joint.record.y - traj_red.record.y)) < 0.02


def test_atom_memory_operator_oracle():
    """f(t) sigma_minus rho must equal +i Tr_bath[a |psi><psi|] along the
    exact joint trajectory."""
    model = sse.build_atom_cavity(1.0, 1.0, 1.0, 2.0, 16)
    psi = sse.atom_initial_state(model, "plus_x")
    path = WienerPath.generate(2500, 1e-3, 7)
    f_grid = atom_riccati_evolve(BENCH, np.arange(0, 2.5 + 5e-4, 1e-3))
    worst = 0.0
    for k in range(path.n_steps):
        psi, _ = sse.sse_step(model, psi, path.increments[k], path.dt)
        if (k + 1) % 100 == 0:
            vr_joint = oracles.memory_operator_from_joint(psi, model.bath_ops[0],
                                                 model.space.dims)
            rho_p = hs.partial_trace(np.outer(psi, psi.conj()),
                                     model.space.dims, 0)
            vr_closed = f_grid[k + 1] * (hs.sigma_minus() @ rho_p)
            worst = max(worst, float(np.max(np.abs(vr_joint - vr_closed))))
    assert worst < 5e-4  # discretization order, not physics


def test_optomech_conditional_quadratures_track():
    p = OptomechParams(omega_m=1.0, delta=1.0, gamma=2.0, g_prime=0.05)
    model = sse.build_linear_optomech(1.0, 1.0, 0.05, 2.0, 1.0, 10, 10)
    psi0 = sse.oscillator_initial_state(model, alpha=1.0)
    path = WienerPath.generate(3000, 1e-3, 42)
    traj_joint = sse.run_sse(model, psi0, path,
                             sse.optomech_observables(model, 1.0, 1.0), 10)
    alpha_vec = hs.coherent(10, 1.0)
    rho0 = np.outer(alpha_vec, alpha_vec.conj())
    traj_red = sme.run_optomech_sme(p, rho0, path, sample_stride=10)
    for name in ("x", "p"):
        a = traj_joint.means[name].real
        b = traj_red.means[name].real
        amplitude = 0.5 * (a.max() - a.min())
        assert np.max(np.abs(a - b)) < 0.05 * amplitude


def test_optomech_memory_operator_oracle():
    """The quadruple-built memory operator must match +i Tr_bath[a rho]
    extracted from the joint state, fed by the same record."""
    p = OptomechParams(omega_m=1.0, delta=1.0, gamma=2.0, g_prime=0.05)
    model = sse.build_linear_optomech(1.0, 1.0, 0.05, 2.0, 1.0, 10, 10)
    psi = sse.oscillator_initial_state(model, alpha=1.0)
    path = WienerPath.generate(2000, 1e-3, 5)
    aux = OptomechRiccatiState()
    worst = 0.0
    for k in range(path.n_steps):
        rho_p = hs.partial_trace(np.outer(psi, psi.conj()), model.space.dims, 0)
        terms = sme.optomech_memory_terms(aux, 10, p)
        vr_closed = sme.apply_memory_terms(terms, rho_p)
        vr_joint = oracles.memory_operator_from_joint(psi, model.bath_ops[0],
                                             model.space.dims)
        worst = max(worst, float(np.max(np.abs(vr_closed - vr_joint))))
        trace_term = 2.0 * np.trace(vr_closed).real
        psi, _ = sse.sse_step(model, psi, path.increments[k], path.dt)
        aux = optomech_riccati_step(aux, p, trace_term, path.increments[k],
                                    path.dt)
    assert worst < 5e-4


def test_quadratic_first_order_phonon_tracking():
    """Weak quadratic coupling: the reduced phonon equation follows the joint
    number expectation to first order in g/gamma."""
    om, gamma, g = 1.0, 0.5, 0.05
    model = sse.build_quadratic_optomech(om, 0.0, g, gamma, 6, 6)
    vec = (hs.basis(6, 0) + hs.basis(6, 2)) / np.sqrt(2)
    psi0 = sse.plant_vector_initial_state(model, vec)
    path = WienerPath.generate(3000, 1e-3, 13)
    traj_joint = sse.run_sse(model, psi0, path, sse.phonon_observables(model), 10)
    rho0 = np.outer(vec, vec.conj())
    traj_red = sme.run_phonon_sme(om, g * g / gamma, rho0, path, 10)
    dev = np.abs(traj_joint.means["n_mech"].real - traj_red.means["n_mech"].real)
    # first-order agreement: deviations bounded by ~ (g/gamma) of the scale
    assert dev.max() < 2.0 * (g / gamma)
