"""Auxiliary memory functions that close the reduced conditional equations.

Two subsystems live here:

* a scalar complex Riccati ODE whose solution f(t) encodes how a lossy
  intermediate mode remembers a two-level plant (deterministic, solved
  with classical RK4), and

* a coupled quadruple (g0, gx, fp, f1) doing the same job for a harmonic
  plant with position coupling.  The quadruple is kept in rescaled
  variables in which every coefficient is bounded: the raw textbook-style
  variables pick up exp(+gamma t) factors that overflow doubles long
  before interesting times.  In these variables the coupling operator is
  assembled as  A = g0 + gx * x + fp * p,  and the memory super-operator
  acting on the plant state rho is

      memory_op = (f1 * rho * A' + A * rho) / (1 - |f1|^2).

  The deterministic part advances with RK4; the measurement-noise kick on
  g0 is added Euler-Maruyama style with the pre-step f1 (Ito convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

# |f| beyond this is treated as a Riccati blow-up rather than physics.
BLOWUP_LIMIT = 1e6

# Minimum allowed 1 - |f1|^2 before the memory_op denominator is declared singular.
F1_SINGULARITY_EPS = 1e-6


@dataclass(frozen=True)
class AtomRiccatiParams:
    """Rates of the two-level-plant model (all 1/time, hbar = 1)."""

    omega_q: float
    delta: float
    gamma: float
    g: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


def atom_riccati_rhs(f, p):
    """df/dt = g + i(omega_q - delta + i gamma) f + g f^2."""
    return p.g + 1j * (p.omega_q - p.delta + 1j * p.gamma) * f + p.g * f * f


def atom_riccati_step(f, p, dt):
    """One classical RK4 step of the scalar Riccati equation.

    Works elementwise when ``f`` is an array (batched trajectories).
    """
    k1 = atom_riccati_rhs(f, p)
    k2 = atom_riccati_rhs(f + 0.5 * dt * k1, p)
    k3 = atom_riccati_rhs(f + 0.5 * dt * k2, p)
    k4 = atom_riccati_rhs(f + dt * k3, p)
    return f + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def atom_riccati_evolve(p, t_grid):
    """Integrate f from f(0)=0 along a uniform grid; returns f at the nodes."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if t_grid.size > 1:
        steps = np.diff(t_grid)
        dt = steps[0]
        wiggle = 64.0 * np.finfo(float).eps * max(1.0, abs(float(t_grid[-1])))
        if dt <= 0 or not np.allclose(steps, dt, rtol=0.0, atol=wiggle):
            raise ValueError("t_grid must be uniform with positive spacing")
    out = np.empty(t_grid.size, dtype=complex)
    f = 0.0 + 0.0j
    out[0] = f
    for k in range(1, t_grid.size):
        f = atom_riccati_step(f, p, t_grid[k] - t_grid[k - 1])
        if abs(f) > BLOWUP_LIMIT:
            raise NumericalFailure("Riccati solution diverged", t=t_grid[k])
        out[k] = f
    return out


def markovian_limit_f(p):
    """Short-memory limit of f, valid when gamma >> g and gamma >> omega_q."""
    if p.gamma <= 0:
        raise ValueError("the short-memory limit needs gamma > 0")
    return complex(p.g / p.gamma)


def steady_state_roots(p):
    """Both roots of g f^2 + i(omega_q - delta + i gamma) f + g = 0."""
    if p.g == 0:
        return (0.0 + 0.0j, 0.0 + 0.0j)
    b = 1j * (p.omega_q - p.delta + 1j * p.gamma)
    disc = np.sqrt(complex(b * b - 4.0 * p.g * p.g))
    return ((-b + disc) / (2.0 * p.g), (-b - disc) / (2.0 * p.g))


def steady_state_f(p, t_probe=200.0, dt=1e-3):
    """Steady value of f selected by forward integration from f(0)=0.

    Both quadratic roots are computed; the physical one is whichever the
    flow from the zero initial condition approaches.
    """
    roots = steady_state_roots(p)
    t_grid = np.arange(0.0, t_probe + dt / 2, dt)
    f_end = atom_riccati_evolve(p, t_grid)[-1]
    return min(roots, key=lambda r: abs(r - f_end))


def write_atom_f_csv(path, t_grid, f_values):
    """Debug dump of the scalar memory function: columns t, Re f, Im f."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,re_f,im_f\n")
        for t, f in zip(t_grid, f_values):
            fh.write(f"{float(t)!r},{float(f.real)!r},{float(f.imag)!r}\n")


def write_quadruple_csv(path, states):
    """Debug dump of the oscillator memory quadruple, one state per row."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,re_g0,im_g0,re_gx,im_gx,re_fp,im_fp,re_f1,im_f1\n")
        for s in states:
            cells = [s.t]
            for z in (s.g0, s.gx, s.fp, s.f1):
                cells.extend((z.real, z.imag))
            fh.write(",".join(repr(float(c)) for c in cells) + "\n")


@dataclass(frozen=True)
class OptomechParams:
    """Rates and oscillator constants of the position-coupled model."""

    omega_m: float
    delta: float
    gamma: float
    g_prime: float
    mass: float = 1.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.mass <= 0 or self.omega_m <= 0:
            raise ValueError("mass and omega_m must be positive")


@dataclass(frozen=True)
class OptomechRiccatiState:
    """Rescaled memory quadruple; all components vanish at t = 0."""

    g0: complex = 0.0 + 0.0j
    gx: complex = 0.0 + 0.0j
    fp: complex = 0.0 + 0.0j
    f1: complex = 0.0 + 0.0j
    t: float = 0.0

    def as_vector(self):
        return np.array([self.g0, self.gx, self.fp, self.f1], dtype=complex)


def optomech_rhs(vec, p, trace_term):
    """Deterministic part of the coupled quadruple.

    ``trace_term`` is Tr{memory_op + memory_op'} supplied by the master-equation
    stepper (held fixed across one step).
    """
    g0, gx, fp, f1 = vec
    kappa = 1j * p.delta + p.gamma
    gp = p.g_prime
    d_g0 = -kappa * g0 + p.gamma * f1 * trace_term - 1j * gp * fp * g0
    d_gx = gp + p.mass * p.omega_m**2 * fp - kappa * gx - gp * f1 - 1j * gp * fp * gx
    d_fp = -gx / p.mass - kappa * fp - 1j * gp * fp * fp
    d_f1 = 1j * gp * fp - 2.0 * kappa * f1 - 1j * gp * fp * f1
    return np.array([d_g0, d_gx, d_fp, d_f1], dtype=complex)


def optomech_riccati_step(state, p, trace_term, dW, dt):
    """Advance the quadruple one step of size ``dt``.

    RK4 on the deterministic system, then the Ito noise kick on g0 using
    the pre-step f1.  Raises when 1 - |f1|^2 approaches zero (the memory_op
    denominator) or when the state stops being finite.
    """
    v = state.as_vector()
    if 1.0 - abs(state.f1) ** 2 <= F1_SINGULARITY_EPS:
        raise NumericalFailure("memory function f1 reached the singular surface |f1| = 1",
                               t=state.t)
    k1 = optomech_rhs(v, p, trace_term)
    k2 = optomech_rhs(v + 0.5 * dt * k1, p, trace_term)
    k3 = optomech_rhs(v + 0.5 * dt * k2, p, trace_term)
    k4 = optomech_rhs(v + dt * k3, p, trace_term)
    v_new = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    v_new[0] += -np.sqrt(2.0 * p.gamma) * state.f1 * dW
    if not np.all(np.isfinite(v_new)):
        raise NumericalFailure("memory quadruple produced non-finite values", t=state.t)
    return OptomechRiccatiState(
        g0=complex(v_new[0]),
        gx=complex(v_new[1]),
        fp=complex(v_new[2]),
        f1=complex(v_new[3]),
        t=state.t + dt,
    )
