"""Integrating-factor Runge-Kutta stepping.

Species diffusion is integrated exactly through the factor
exp(-D_i*|k|^2*dt); only advection and electromigration are treated
explicitly.  Vorticity carries no dissipation, so its factor is 1 and it
advances purely explicitly.  With the change of variable
w(t) = exp(-L t) u(t), classical RK stages applied to w give, per step h
and per component (E1 = exp(L h/2), E2 = exp(L h), L = -D|k|^2):

  IF-RK4:  U1 = E1*(u0 + h/2*N(u0))
           U2 = E1*u0 + h/2*N(U1)
           U3 = E2*u0 + h*E1*N(U2)
           u1 = E2*u0 + h/6*(E2*N(u0) + 2*E1*(N(U1) + N(U2)) + N(U3))

  IF-RK2:  U1 = E2*(u0 + h*N(u0))
           u1 = E2*u0 + h/2*(E2*N(u0) + N(U1))

With N = 0 both schemes reduce to u1 = E2*u0, i.e. single-mode decay is
exact regardless of dt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError
from .models import (SimState, euler_vorticity_tendency, np_nonlinear,
                     state_from_arrays, vorticity_tendency)
from .spectral import (SpectralField, TWO_PI, gradient, norm_linf_vec,
                       to_physical, to_spectral)

SCHEMES = ("IF-RK2", "IF-RK4")


@dataclass(frozen=True)
class StepperConfig:
    """Time-scheme settings.

    dt is the fixed step, or the ceiling when ``adaptive`` is set; the
    adaptive rule is dt = cfl*h/V with h the grid spacing and V the larger
    of the grid-max speed and the electromigration drift bound.
    """

    scheme: str = "IF-RK4"
    dt: float = 0.01
    adaptive: bool = False
    cfl: float = 0.5
    t_end: float = 1.0
    positivity_clip: bool = False
    positivity_tol: float = 1e-10

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}",
                              key_path="stepper.scheme")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be positive and finite",
                              key_path="stepper.dt")
        if not (0 < self.cfl <= 1):
            raise ConfigError("cfl must lie in (0, 1]", key_path="stepper.cfl")
        if not np.isfinite(self.t_end):
            raise ConfigError("t_end must be finite", key_path="stepper.t_end")
        if self.positivity_tol < 0:
            raise ConfigError("positivity_tol must be >= 0",
                              key_path="stepper.positivity_tol")


def _ifrk_step(arrays, lams, nonlin, dt, scheme):
    """One integrating-factor RK step on raw coefficient arrays."""
    e1 = [np.exp(-lam * (0.5 * dt)) for lam in lams]
    e2 = [np.exp(-lam * dt) for lam in lams]
    n1 = nonlin(arrays)
    if scheme == "IF-RK2":
        u1 = [f * (a + dt * k) for f, a, k in zip(e2, arrays, n1)]
        n2 = nonlin(u1)
        return [f * a + (0.5 * dt) * (f * k1 + k2)
                for f, a, k1, k2 in zip(e2, arrays, n1, n2)]
    u1 = [f * (a + (0.5 * dt) * k) for f, a, k in zip(e1, arrays, n1)]
    n2 = nonlin(u1)
    u2 = [f * a + (0.5 * dt) * k for f, a, k in zip(e1, arrays, n2)]
    n3 = nonlin(u2)
    u3 = [f2 * a + dt * f1 * k for f1, f2, a, k in zip(e1, e2, arrays, n3)]
    n4 = nonlin(u3)
    return [f2 * a + (dt / 6.0) * (f2 * k1 + 2.0 * f1 * (k2 + k3) + k4)
            for f1, f2, a, k1, k2, k3, k4 in zip(e1, e2, arrays, n1, n2, n3, n4)]


def _model_arrays(state: SimState):
    arrays = [sp.c.coeffs for sp in state.species]
    lams = [sp.D * state.grid.k2 for sp in state.species]
    if state.is_euler:
        arrays.append(state.fluid.omega.coeffs)
        lams.append(np.zeros_like(state.grid.k2))
    return arrays, lams


def _model_nonlin(template: SimState):
    # derived caches are rebuilt at every stage on purpose: rho/phi/u must
    # track the stage values, not the step's initial state

    def nonlin(arrays):
        st = state_from_arrays(template, arrays, template.time)
        out = [t.coeffs for t in np_nonlinear(st)]
        if template.is_euler:
            out.append(vorticity_tendency(st).coeffs)
        return out

    return nonlin


def _clip_negative(arrays, template: SimState, tol: float):
    """Clamp physical-space negatives to zero, then restore the exact mass."""
    n_sp = len(template.species)
    for i in range(n_sp):
        f = SpectralField(template.grid, arrays[i])
        vals = to_physical(f)
        lo = float(np.min(vals))
        if lo >= -tol:
            continue
        mass = arrays[i][0, 0].real
        clipped = to_spectral(template.grid, np.maximum(vals, 0.0))
        c = np.array(clipped.coeffs)
        if c[0, 0].real > 0 and mass > 0:
            c *= mass / c[0, 0].real
        arrays[i] = c
    return arrays


def adaptive_dt(state: SimState, cfg: StepperConfig) -> float:
    """CFL step bound; never exceeds cfg.dt.

    The transport speed is the grid-max |u|; the electromigration drift is
    bounded by max_i(D_i |z_i|) * grid-max |grad phi|.
    """
    d = state.require_derived()
    umax = norm_linf_vec(d.u)
    drift = 0.0
    if state.species:
        gphi = gradient(d.phi)
        drift = max(sp.D * abs(sp.z) for sp in state.species) * norm_linf_vec(gphi)
    v = max(umax, drift)
    if v == 0.0:
        return cfg.dt
    h = TWO_PI / state.grid.n
    return min(cfg.dt, cfg.cfl * h / v)


def step(state: SimState, cfg: StepperConfig, *, dt: float | None = None,
         step_index: int = 0) -> SimState:
    """Advance one step; raises DivergenceError on NaN/Inf coefficients."""
    if dt is None:
        dt = adaptive_dt(state, cfg) if cfg.adaptive else cfg.dt
    if not (np.isfinite(dt) and dt > 0):
        raise ConfigError(f"step size must be positive and finite, got {dt}")
    arrays, lams = _model_arrays(state)
    out = _ifrk_step(arrays, lams, _model_nonlin(state), dt, cfg.scheme)
    for a in out:
        if not np.all(np.isfinite(a.view(np.float64))):
            raise DivergenceError("non-finite coefficient", step_index=step_index)
    if cfg.positivity_clip:
        out = _clip_negative(out, state, cfg.positivity_tol)
    return state_from_arrays(state, out, state.time + dt)


def euler_reference_step(omega: SpectralField, cfg: StepperConfig, *,
                         dt: float | None = None,
                         step_index: int = 0) -> SpectralField:
    """Advance unforced Euler vorticity with the same RK core.

    Charge terms are absent from this call path entirely; it exists so
    charged runs with c_i == 0 can be checked against a clean reference.
    """
    if dt is None:
        dt = cfg.dt

    def nonlin(arrays):
        return [euler_vorticity_tendency(SpectralField(omega.grid, arrays[0])).coeffs]

    out = _ifrk_step([omega.coeffs], [np.zeros_like(omega.grid.k2)],
                     nonlin, dt, cfg.scheme)
    if not np.all(np.isfinite(out[0].view(np.float64))):
        raise DivergenceError("non-finite coefficient", step_index=step_index)
    return SpectralField(omega.grid, out[0])


@dataclass
class Trajectory:
    """Step times plus snapshot states kept at the hook cadence."""

    times: list[float] = field(default_factory=list)
    snapshots: list[tuple[float, SimState]] = field(default_factory=list)
    steps_taken: int = 0
    diverged: bool = False
    divergence_step: int | None = None


def run(initial: SimState, cfg: StepperConfig, hooks=(), cadence: int = 1) -> Trajectory:
    """March from initial.time to cfg.t_end.

    Hooks are callables hook(step_index, state), invoked on the initial
    state, every ``cadence`` accepted steps, and on the final state.  On
    divergence the partial trajectory is returned with the flag set.
    """
    if cadence < 1:
        raise ConfigError("cadence must be a positive integer", key_path="cadence")
    eps = 1e-12 * max(1.0, abs(cfg.t_end))
    if cfg.t_end < initial.time - eps:
        raise ConfigError("t_end precedes the initial time", key_path="stepper.t_end")
    traj = Trajectory(times=[initial.time])
    state = initial if initial.fresh else state_from_arrays(
        initial, _model_arrays(initial)[0], initial.time)

    def emit(k, st):
        for hook in hooks:
            hook(k, st)
        traj.snapshots.append((st.time, st))

    emit(0, state)
    k = 0
    while state.time < cfg.t_end - eps:
        dt = adaptive_dt(state, cfg) if cfg.adaptive else cfg.dt
        dt = min(dt, cfg.t_end - state.time)
        try:
            state = step(state, cfg, dt=dt, step_index=k)
        except DivergenceError as err:
            traj.diverged = True
            traj.divergence_step = err.step_index
            break
        k += 1
        traj.times.append(state.time)
        traj.steps_taken = k
        done = state.time >= cfg.t_end - eps
        if k % cadence == 0 or done:
            emit(k, state)
    return traj
