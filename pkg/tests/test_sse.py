import numpy as np
import pytest

from memtraj import hilbert as hs
from memtraj import sse
from memtraj.errors import DimensionError, NumericalFailure
from memtraj.noise import WienerPath


def bench_model(n_cavity=16):
    return sse.build_atom_cavity(1.0, 1.0, 1.0, 2.0, n_cavity)


def test_atom_cavity_builder():
    model = bench_model()
    assert model.space.dims == (2, 16)
    evals = np.linalg.eigvalsh(model.h_plant)
    assert np.allclose(sorted(evals), [-0.5, 0.5])
    assert np.max(np.abs(model.h_total - hs.dagger(model.h_total))) == 0.0


def test_atom_cavity_zero_coupling_hamiltonian():
    model = sse.build_atom_cavity(1.0, 1.0, 0.0, 2.0, 8)
    bare = (model.space.embed(model.h_plant, 0)
            + 1.0 * hs.dagger(model.bath_ops[0]) @ model.bath_ops[0])
    assert np.array_equal(model.h_total, bare)


def test_atom_cavity_invalid_dimension():
    with pytest.raises(DimensionError):
        sse.build_atom_cavity(1.0, 1.0, 1.0, 2.0, 1)


def test_linear_optomech_builder():
    model = sse.build_linear_optomech(1.0, 1.0, 0.3, 2.0, 1.0, 6, 5)
    assert model.space.dims == (6, 5)
    interaction = model.h_total - model.space.embed(model.h_plant, 0) \
        - 1.0 * hs.dagger(model.bath_ops[0]) @ model.bath_ops[0]
    assert np.max(np.abs(interaction - hs.dagger(interaction))) < 1e-14


def test_linear_optomech_decoupled_free_oscillation():
    model = sse.build_linear_optomech(1.0, 1.0, 0.0, 2.0, 1.0, 12, 4)
    psi0 = sse.oscillator_initial_state(model, alpha=1.0)
    path = WienerPath.generate(20000, 1e-4, 3)
    traj = sse.run_sse(model, psi0, path,
                       sse.optomech_observables(model, 1.0, 1.0), 100)
    expected = np.sqrt(2.0) * np.cos(traj.times)
    assert np.max(np.abs(traj.means["x"].real - expected)) < 2e-3


def test_quadratic_builder_properties():
    model = sse.build_quadratic_optomech(1.0, 0.0, 0.1, 0.5, 8, 4)
    L = model.coupling_op
    assert np.max(np.abs(L - hs.dagger(L))) == 0.0
    assert np.linalg.eigvalsh(L).min() > -1e-12
    vac = hs.basis(8, 0)
    assert hs.expectation(L, vac).real == pytest.approx(0.5)


def test_quadratic_zero_coupling_constant_populations():
    model = sse.build_quadratic_optomech(1.0, 0.0, 0.0, 0.5, 6, 4)
    vec = (hs.basis(6, 0) + hs.basis(6, 2)) / np.sqrt(2)
    psi0 = sse.plant_vector_initial_state(model, vec)
    path = WienerPath.generate(2000, 1e-4, 4)
    traj = sse.run_sse(model, psi0, path, sse.phonon_observables(model), 20)
    assert np.max(np.abs(traj.means["n_mech"].real - 1.0)) < 1e-4


def test_dark_state_record_is_pure_noise():
    """Vacuum modes and no coupling: the record must be exactly dW/sqrt(2)."""
    model = sse.build_atom_cavity(1.0, 1.0, 0.0, 2.0, 4)
    psi = sse.atom_initial_state(model, "plus_x")
    dt = 1e-3
    rng = np.random.default_rng(8)
    for _ in range(50):
        dW = rng.normal() * np.sqrt(dt)
        psi_new, y = sse.sse_step(model, psi, dW, dt)
        assert y == dW / (np.sqrt(2.0) * dt)  # exact: a|0> = 0 kills the mean
        psi = psi_new
    # plant part still follows the unitary, modes still in vacuum
    assert hs.top_level_population(psi, model.space.dims, 1) == 0.0


def test_dark_state_mode_expectation_zero():
    model = sse.build_atom_cavity(1.0, 1.0, 0.0, 2.0, 4)
    psi = sse.atom_initial_state(model, "plus_x")
    path = WienerPath.generate(500, 1e-3, 12)
    for k in range(path.n_steps):
        psi, _ = sse.sse_step(model, psi, path.increments[k], path.dt)
        assert abs(hs.expectation(model.bath_ops[0], psi)) == 0.0


def test_closed_evolution_norm_drift_quadratic_in_dt():
    model = sse.build_atom_cavity(1.0, 1.0, 0.0, 0.0, 4)
    psi = sse.atom_initial_state(model, "plus_x")
    drifts = []
    for dt in (1e-3, 5e-4):
        dpsi, _ = sse.sse_increment(model, psi, 0.0, dt)
        drifts.append(abs(np.linalg.norm(psi + dpsi) - 1.0))
    assert drifts[0] / drifts[1] == pytest.approx(4.0, rel=0.05)


def test_record_formula_matches_mode_quadrature():
    model = bench_model(8)
    psi = sse.atom_initial_state(model, "plus_x")
    path = WienerPath.generate(300, 1e-3, 21)
    for k in range(path.n_steps):
        before = psi
        psi, y = sse.sse_step(model, psi, path.increments[k], path.dt)
        mean = 2.0 * np.sqrt(2.0) * hs.expectation(model.bath_ops[0], before).imag
        assert y == pytest.approx(mean + path.increments[k] / (np.sqrt(2) * path.dt),
                                  abs=1e-12)


def test_run_sse_sampling_and_drift():
    model = bench_model(8)
    psi0 = sse.atom_initial_state(model, "plus_x")
    path = WienerPath.generate(1000, 1e-3, 42)
    traj = sse.run_sse(model, psi0, path, sse.atom_observables(model), 100)
    assert traj.times.shape == (11,)
    assert traj.record.y.shape == (1000,)
    assert traj.times[-1] == pytest.approx(1.0)
    # pre-normalization norm deviation is O(dt); regression bound on this seed
    assert 0.0 < traj.drift.max() < 5e-3


def test_run_sse_zero_length_path():
    model = bench_model(4)
    psi0 = sse.atom_initial_state(model, "plus_x")
    traj = sse.run_sse(model, psi0, None, sse.atom_observables(model), 10)
    assert traj.times.tolist() == [0.0]
    assert traj.record.y.size == 0
    assert traj.means["sigma_x"][0] == pytest.approx(1.0)


def test_run_sse_record_only():
    model = bench_model(4)
    psi0 = sse.atom_initial_state(model, "plus_x")
    path = WienerPath.generate(50, 1e-3, 1)
    traj = sse.run_sse(model, psi0, path, {}, 10)
    assert traj.means == {}
    assert traj.record.y.shape == (50,)


def test_run_sse_validates_initial_state():
    model = bench_model(4)
    with pytest.raises(ValueError):
        sse.run_sse(model, 2.0 * sse.atom_initial_state(model), None, {}, 1)
    with pytest.raises(DimensionError):
        sse.run_sse(model, hs.basis(5, 0), None, {}, 1)


def test_step_size_guard():
    # gamma <n> dt = 4 overshoots the damping far past the norm window
    model = bench_model(8)
    psi = np.kron(hs.basis(2, 1), hs.basis(8, 4))
    with pytest.raises(NumericalFailure):
        sse.sse_step(model, psi, 0.0, 0.5)


def test_truncation_insensitivity_on_benchmark():
    """The excitation-exchange coupling with a vacuum mode caps the mode at
    one quantum, so doubling the truncation must not change anything."""
    path = WienerPath.generate(2000, 1e-3, 42)
    means = []
    for n_cav in (16, 32):
        model = bench_model(n_cav)
        psi0 = sse.atom_initial_state(model, "plus_x")
        traj = sse.run_sse(model, psi0, path, sse.atom_observables(model), 50)
        means.append(np.stack([traj.means[k].real
                               for k in ("sigma_x", "sigma_y", "sigma_z")]))
        assert traj.leakage["cavity"].max() == 0.0
    assert np.max(np.abs(means[0] - means[1])) < 1e-9


def test_leakage_decreases_with_truncation():
    """Position-coupled model populates the mode; more levels, less leakage."""
    path = WienerPath.generate(2000, 1e-3, 42)
    leaks = []
    for n_cav in (4, 8):
        model = sse.build_linear_optomech(1.0, 1.0, 0.6, 2.0, 1.0, 10, n_cav)
        psi0 = sse.oscillator_initial_state(model, alpha=1.0)
        traj = sse.run_sse(model, psi0, path,
                           sse.optomech_observables(model, 1.0, 1.0), 100)
        leaks.append(traj.leakage["cavity"].max())
    assert leaks[1] < leaks[0] / 10


def test_multi_mode_stepper_algebra():
    """Two modes exercise the k != k' double sum; a dark two-mode state keeps
    the record pure noise and the damping matrix matches by hand."""
    space = hs.Space((2, 3, 3))
    h_plant = 0.5 * hs.sigma_z()
    model = sse._assemble(space, h_plant, (0.5, 1.5), (0.0, 0.0), (2.0, 0.5),
                          hs.sigma_minus(), (("m1", 1), ("m2", 2)), "two_mode")
    a1, a2 = model.bath_ops
    w = np.sqrt(2.0) * a1 + np.sqrt(0.5) * a2
    assert np.allclose(model.meas_op, w, atol=0)
    psi = sse.atom_initial_state(model, "plus_x")
    dpsi, y = sse.sse_increment(model, psi, 0.02, 1e-3)
    # vacuum modes: only the plant Hamiltonian contributes
    expected = -1j * (model.h_total @ psi) * 1e-3
    assert np.allclose(dpsi, expected, atol=1e-15)
    assert y == 0.02 / (np.sqrt(2.0) * 1e-3)
