"""Electrodiffusion on the 2-D torus: Nernst-Planck transport coupled to
Euler or Darcy flow.

All quantities are nondimensional.  The species concentrations c_i obey

    dc_i/dt + u.grad(c_i) = D_i*Laplace(c_i) + D_i*z_i*div(c_i*grad(phi)),

with charge density rho = sum_i z_i c_i and electric potential solving
-Laplace(phi) = rho.  The velocity u is divergence-free and comes from
either the incompressible Euler equations in vorticity form,

    domega/dt + u.grad(omega) = -perp(grad rho).grad(phi),
    u = perp(grad) psi,  Laplace(psi) = omega,

or from Darcy's law u = -P(rho*grad(phi)) with P the Leray projection.

Advection is evaluated in divergence form div(u*c) (legitimate because
div u = 0 holds mode-wise), which pins the zero mode of every tendency to
exactly 0.0 and makes discrete mass conservation bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DomainError, ModelUsageError, StaleStateError
from .spectral import (FOUR_PI_SQ, SpectralField, SpectralGrid, VectorField,
                       _ddx, _ddy, gradient, leray_project, multiply_dealiased,
                       solve_poisson, to_physical, zero_field)


@dataclass(frozen=True)
class IonSpecies:
    """One ionic species: valence z, diffusivity D > 0, concentration c."""

    z: float
    D: float
    c: SpectralField

    def __post_init__(self):
        if not (self.D > 0 and np.isfinite(self.D)):
            raise ConfigError("diffusivity D must be positive and finite")
        if not np.isfinite(self.z):
            raise ConfigError("valence z must be finite")


@dataclass(frozen=True)
class EulerFluid:
    """Euler flow carried by its (mean-zero) scalar vorticity."""

    omega: SpectralField

    def __post_init__(self):
        if not self.omega.is_mean_zero():
            raise DomainError("vorticity must be mean-zero")


@dataclass(frozen=True)
class DarcyFluid:
    """Marker for Darcy flow; the velocity is slaved to rho and phi."""


@dataclass(frozen=True)
class DerivedFields:
    """Cached fields slaved to the prognostic variables."""

    rho: SpectralField
    phi: SpectralField
    u: VectorField


@dataclass(frozen=True)
class SimState:
    """Prognostic variables plus (optionally) fresh derived caches.

    ``derived`` is None exactly when the caches are stale; tendency
    evaluation refuses to run on a stale state.  Use make_state to build
    states with fresh caches.
    """

    grid: SpectralGrid
    species: tuple[IonSpecies, ...]
    fluid: EulerFluid | DarcyFluid
    time: float = 0.0
    derived: DerivedFields | None = None

    @property
    def fresh(self) -> bool:
        return self.derived is not None

    def require_derived(self) -> DerivedFields:
        if self.derived is None:
            raise StaleStateError(
                "derived fields (rho, phi, u) are stale; rebuild via make_state")
        return self.derived

    @property
    def is_euler(self) -> bool:
        return isinstance(self.fluid, EulerFluid)


def charge_density(grid: SpectralGrid, species: tuple[IonSpecies, ...]) -> SpectralField:
    """rho = sum_i z_i c_i (zero field when no species are present)."""
    out = np.zeros((grid.n, grid.n), dtype=np.complex128)
    for sp in species:
        if sp.c.grid.n != grid.n:
            raise ConfigError("species concentration lives on a different grid")
        out += sp.z * sp.c.coeffs
    return SpectralField(grid, out)


def velocity_from_vorticity(omega: SpectralField) -> VectorField:
    """Invert omega -> u: solve Laplace(psi) = omega, then u = perp(grad) psi."""
    psi = SpectralField(omega.grid, -solve_poisson(omega).coeffs)
    return gradient(psi, "perp")


def darcy_velocity(rho: SpectralField, phi: SpectralField) -> VectorField:
    """u = -P(rho*grad(phi)) with the product dealiased."""
    gphi = gradient(phi)
    force = VectorField(multiply_dealiased(rho, gphi.x),
                        multiply_dealiased(rho, gphi.y))
    return -1.0 * leray_project(force)


def make_state(grid: SpectralGrid,
               species: tuple[IonSpecies, ...],
               fluid: EulerFluid | DarcyFluid,
               time: float = 0.0) -> SimState:
    """Assemble a SimState with freshly computed rho, phi and u."""
    rho = charge_density(grid, species)
    phi = solve_poisson(rho)
    if isinstance(fluid, EulerFluid):
        if fluid.omega.grid.n != grid.n:
            raise ConfigError("vorticity lives on a different grid")
        u = velocity_from_vorticity(fluid.omega)
    elif isinstance(fluid, DarcyFluid):
        u = darcy_velocity(rho, phi)
    else:
        raise ConfigError(f"unknown fluid model {type(fluid).__name__}")
    return SimState(grid, tuple(species), fluid, float(time),
                    DerivedFields(rho, phi, u))


def transport_div(u: VectorField, f: SpectralField) -> SpectralField:
    """div(u*f); equals u.grad(f) for divergence-free u, with an exactly
    zero mean."""
    fx = multiply_dealiased(u.x, f)
    fy = multiply_dealiased(u.y, f)
    return SpectralField(f.grid, _ddx(fx) + _ddy(fy))


def migration_div(c: SpectralField, gphi: VectorField) -> SpectralField:
    """div(c*grad(phi)); the electromigration flux divergence."""
    fx = multiply_dealiased(c, gphi.x)
    fy = multiply_dealiased(c, gphi.y)
    return SpectralField(c.grid, _ddx(fx) + _ddy(fy))


def np_nonlinear(state: SimState) -> list[SpectralField]:
    """Advection + electromigration parts of each species tendency.

    The stepper integrates diffusion exactly through its integrating
    factor, so it consumes this split; np_tendency adds diffusion back.
    """
    d = state.require_derived()
    gphi = gradient(d.phi)
    out = []
    for sp in state.species:
        adv = transport_div(d.u, sp.c)
        migr = migration_div(sp.c, gphi)
        out.append(SpectralField(state.grid,
                                 sp.D * sp.z * migr.coeffs - adv.coeffs))
    return out


def np_tendency(state: SimState) -> list[SpectralField]:
    """Full right-hand side dc_i/dt for every species."""
    nl = np_nonlinear(state)
    out = []
    for sp, part in zip(state.species, nl):
        out.append(SpectralField(state.grid,
                                 part.coeffs - sp.D * state.grid.k2 * sp.c.coeffs))
    return out


def euler_vorticity_tendency(omega: SpectralField,
                             u: VectorField | None = None) -> SpectralField:
    """Unforced vorticity transport -u.grad(omega).

    This is the charge-free reference path: no electric quantity is ever
    touched here.
    """
    if u is None:
        u = velocity_from_vorticity(omega)
    return -1.0 * transport_div(u, omega)


def electric_jacobian(rho: SpectralField, phi: SpectralField) -> SpectralField:
    """perp(grad rho).grad(phi), the vorticity source; mean pinned to 0."""
    grho = gradient(rho, "perp")
    gphi = gradient(phi)
    out = (multiply_dealiased(grho.x, gphi.x).coeffs
           + multiply_dealiased(grho.y, gphi.y).coeffs)
    out[0, 0] = 0.0  # analytically zero; drop the O(eps) quadrature residue
    return SpectralField(rho.grid, out)


def vorticity_tendency(state: SimState) -> SpectralField:
    """domega/dt = -u.grad(omega) - perp(grad rho).grad(phi)."""
    if not state.is_euler:
        raise ModelUsageError("vorticity tendency only applies to the Euler model")
    d = state.require_derived()
    adv = euler_vorticity_tendency(state.fluid.omega, d.u)
    force = electric_jacobian(d.rho, d.phi)
    return SpectralField(state.grid, adv.coeffs - force.coeffs)


def electric_force_mean(rho: SpectralField) -> tuple[float, float]:
    """Integral of rho*grad(phi) over the torus (identically zero in the
    continuum); evaluated by quadrature of the product on the grid."""
    phi = solve_poisson(rho)
    gphi = gradient(phi)
    rr = to_physical(rho)
    w = FOUR_PI_SQ / rho.grid.n**2
    return (w * float(np.sum(rr * to_physical(gphi.x))),
            w * float(np.sum(rr * to_physical(gphi.y))))


def state_from_arrays(template: SimState, arrays: list[np.ndarray],
                      time: float) -> SimState:
    """Rebuild a fresh state from raw coefficient arrays (stepper internal).

    ``arrays`` lists one array per species, plus the vorticity array last
    for the Euler model.
    """
    n_sp = len(template.species)
    species = tuple(replace(sp, c=SpectralField(template.grid, a))
                    for sp, a in zip(template.species, arrays[:n_sp]))
    if template.is_euler:
        fluid: EulerFluid | DarcyFluid = EulerFluid(
            SpectralField(template.grid, arrays[n_sp]))
    else:
        fluid = template.fluid
    return make_state(template.grid, species, fluid, time)
