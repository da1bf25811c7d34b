"""Run diagnostics: conservation reports, analyticity-radius estimates,
Gevrey energy-balance residuals and Gronwall-type ledgers.

The analyticity radius of a periodic field is read off the exponential
decay of its spectral shell maxima: if max_{|k| in shell s} |f_k| behaves
like exp(-tau*|k|), a least-squares fit of log(shell max) against |k|
over a configured band recovers tau.  The theoretical counterparts are

* Darcy: tau(t) >= 0.5*min_i(D_i) * min(t, T0/2), a staircase that grows
  linearly and then plateaus (T0 is a calibration input).
* Euler: the running lower bound

      tau(t) = 1 / ( g(t) * (1/tau0 + C*int_0^t (||L^{m-1} omega|| + Atilde) / g ds) ),

  with g(t) = exp(C*int_0^t B ds) and, writing chi = 1 when ions are
  present and 0 otherwise,

      B = ||L^{m-1} rho|| + ||L^{m-1} rho||^2 + chi*(||L^{m-1} u||^2 + 1)
          + ||grad u||_inf + sum_i |mean c_i(0)|^2,
      A(t) = g(t) * ( sqrt(y(0)) + C*(1 + tau0) * int_0^t ||L^{m-1} omega||^2 / g ds ),
      Atilde = A + chi*A^2,

  where L = Lambda is the square root of -Laplace and
  y(t) = sum_i ||e^{tau L} L^m c_i||^2 + ||e^{tau L} L^{m-1} omega||^2.

All quadratures are trapezoidal on the sample grid; every untracked
analysis constant enters through the single knob C_user.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, GevreyOverflowError, InsufficientShellsError,
                     TimeGridError)
from .models import (SimState, electric_force_mean, electric_jacobian,
                     migration_div, transport_div)
from .spectral import (SpectralField, VectorField, dealias, gradient,
                       gevrey_weight, norm_gevrey, norm_hm, norm_l2, norm_l4,
                       norm_linf, to_physical, FOUR_PI_SQ)

DEFAULT_NOISE_FLOOR = 1e-14


def cumulative_trapezoid(y, x) -> np.ndarray:
    """Running trapezoid integral of samples y over strictly increasing x."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y.shape != x.shape or y.ndim != 1:
        raise ConfigError("series and time grid must be 1-D and equally long")
    if x.size > 1 and np.any(np.diff(x) <= 0):
        raise TimeGridError("time samples must be strictly increasing")
    out = np.zeros_like(y)
    if y.size > 1:
        np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x), out=out[1:])
    return out


# ---------------------------------------------------------------------------
# invariant reports


@dataclass(frozen=True)
class InvariantReport:
    """Conserved-quantity audit for one state.

    ``dissipation`` accumulates sum_i D_i * int ||grad c_i||^2 dt by the
    trapezoid rule across consecutive reports (``running`` argument).
    """

    time: float
    mass: tuple[float, ...]
    min_c: tuple[float, ...]
    mean_velocity: tuple[float, float]
    force_mean: tuple[float, float]
    norms: dict
    dissipation_integrand: float
    dissipation: float


_NORM_KINDS = ("L2", "L4", "Linf", "H1", "H2", "Hm")


def _scalar_norms(f: SpectralField, m_star: float) -> dict:
    return {"L2": norm_l2(f), "L4": norm_l4(f), "Linf": norm_linf(f),
            "H1": norm_hm(f, 1), "H2": norm_hm(f, 2), "Hm": norm_hm(f, m_star)}


def _vector_norms(v: VectorField, m_star: float) -> dict:
    vx = to_physical(v.x)
    vy = to_physical(v.y)
    mag = np.hypot(vx, vy)
    n = v.grid.n
    out = {"Linf": float(np.max(mag)),
           "L4": float((FOUR_PI_SQ / n**2 * np.sum(mag**4))**0.25)}
    for kind, m in (("L2", None), ("H1", 1), ("H2", 2), ("Hm", m_star)):
        if m is None:
            out[kind] = float(np.hypot(norm_l2(v.x), norm_l2(v.y)))
        else:
            out[kind] = float(np.hypot(norm_hm(v.x, m), norm_hm(v.y, m)))
    return out


def invariant_report(state: SimState, running: InvariantReport | None = None,
                     m_star: float = 3) -> InvariantReport:
    """Audit masses, mean velocity, electric force mean, minima and norms."""
    d = state.require_derived()
    mass = tuple(FOUR_PI_SQ * sp.c.coeffs[0, 0].real for sp in state.species)
    min_c = tuple(float(np.min(to_physical(sp.c))) for sp in state.species)
    mean_u = (float(d.u.x.coeffs[0, 0].real), float(d.u.y.coeffs[0, 0].real))
    force = electric_force_mean(d.rho)
    norms = {f"c{i + 1}": _scalar_norms(sp.c, m_star)
             for i, sp in enumerate(state.species)}
    if state.is_euler:
        norms["omega"] = _scalar_norms(state.fluid.omega, m_star)
    else:
        norms["u"] = _vector_norms(d.u, m_star)
    integrand = float(sum(sp.D * norm_gevrey(sp.c, 0.0, 1)**2
                          for sp in state.species))
    if running is None:
        dissipation = 0.0
    else:
        dt = state.time - running.time
        if dt < 0:
            raise TimeGridError("invariant reports must advance in time")
        dissipation = running.dissipation + 0.5 * dt * (
            running.dissipation_integrand + integrand)
    return InvariantReport(time=float(state.time), mass=mass, min_c=min_c,
                           mean_velocity=mean_u, force_mean=force, norms=norms,
                           dissipation_integrand=integrand,
                           dissipation=dissipation)


# ---------------------------------------------------------------------------
# radius estimation


@dataclass(frozen=True)
class ShellSpectrum:
    """Per-shell maxima of |f_k|; shells are the integers round(|k|)."""

    shells: np.ndarray
    amplitude: np.ndarray
    k_at_max: np.ndarray


def _shell_reduce(amps: np.ndarray, grid) -> ShellSpectrum:
    bins = np.rint(grid.kmag).astype(np.int64).ravel()
    a = amps.ravel()
    km = grid.kmag.ravel()
    order = np.lexsort((km, a, bins))
    b_sorted = bins[order]
    last = np.flatnonzero(np.r_[b_sorted[1:] != b_sorted[:-1], True])
    sel = order[last]
    return ShellSpectrum(shells=b_sorted[last], amplitude=a[sel],
                         k_at_max=km[sel])


def shell_spectrum(f: SpectralField) -> ShellSpectrum:
    return _shell_reduce(np.abs(f.coeffs), f.grid)


def combined_shell_spectrum(fields) -> ShellSpectrum:
    """Shell maxima over several fields at once (max over fields per mode)."""
    fields = list(fields)
    if not fields:
        raise ConfigError("need at least one field for a shell spectrum")
    amps = np.abs(fields[0].coeffs)
    for f in fields[1:]:
        amps = np.maximum(amps, np.abs(f.coeffs))
    return _shell_reduce(amps, fields[0].grid)


def radius_fit(spec: ShellSpectrum, fit_band: tuple[float, float],
               noise_floor: float = DEFAULT_NOISE_FLOOR) -> tuple[float, float]:
    """Least-squares decay fit on a shell spectrum; see radius_estimate."""
    k_min, k_max = fit_band
    if not (0 < k_min < k_max):
        raise ConfigError("fit band must satisfy 0 < k_min < k_max",
                          key_path="fit_band")
    keep = ((spec.shells >= k_min) & (spec.shells <= k_max)
            & (spec.amplitude > noise_floor))
    if np.count_nonzero(keep) < 4:
        raise InsufficientShellsError(
            f"only {np.count_nonzero(keep)} usable shells in band "
            f"[{k_min}, {k_max}] above noise floor {noise_floor:g}; need >= 4")
    x = spec.k_at_max[keep]
    y = np.log(spec.amplitude[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - np.mean(y))**2))
    if ss_tot <= 1e-30:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return max(0.0, -float(slope)), r2


def radius_estimate(f: SpectralField, fit_band: tuple[float, float],
                    noise_floor: float = DEFAULT_NOISE_FLOOR) -> tuple[float, float]:
    """Estimate the analyticity radius from spectral decay.

    Fits log(shell max |f_k|) against |k| (taken at the maximizing mode)
    by least squares over shells in ``fit_band``; returns (tau_est,
    fit_quality) with tau_est = max(0, -slope) and fit_quality the R^2 of
    the fit.  Shells at or below ``noise_floor`` are ignored; fewer than 4
    usable shells raises InsufficientShellsError.
    """
    if fit_band[1] > f.grid.n / 3.0:
        raise ConfigError("fit band must stay inside the dealiased range "
                          f"k_max <= n/3 = {f.grid.n / 3.0:g}", key_path="fit_band")
    return radius_fit(shell_spectrum(f), fit_band, noise_floor)


@dataclass(frozen=True)
class RadiusRecord:
    """One row of the radius time series."""

    time: float
    tau_estimated: float
    tau_theory: float
    fit_quality: float
    gevrey_norm_at_tau: float


# ---------------------------------------------------------------------------
# theoretical radius bounds


def npd_radius_bound(t: float, diffusivities, T0: float) -> float:
    """Darcy lower bound 0.5*min(D)*min(t, T0/2)."""
    ds = [float(d) for d in diffusivities]
    if not ds or min(ds) <= 0:
        raise ConfigError("need at least one positive diffusivity")
    if not (T0 > 0):
        raise ConfigError("T0 must be positive", key_path="T0")
    if t < 0:
        raise ConfigError("time must be nonnegative")
    return 0.5 * min(ds) * min(t, 0.5 * T0)


@dataclass(frozen=True)
class NpeRadiusBudget:
    """Ingredient series of the Euler-model radius bound."""

    tau0: float
    c_user: float
    chi: float
    sqrt_y0: float
    times: np.ndarray
    b_of_t: np.ndarray
    g_of_t: np.ndarray
    a_of_t: np.ndarray
    atilde_of_t: np.ndarray
    tau_of_t: np.ndarray


def npe_radius_bound(times, omega_norm, b_of_t, sqrt_y0: float, *,
                     tau0: float, c_user: float = 1.0,
                     chi: float = 1.0) -> NpeRadiusBudget:
    """Evaluate the Euler-model radius bound from sampled ingredients.

    ``omega_norm`` samples ||Lambda^{m-1} omega||(t) and ``b_of_t`` samples
    B(t); both live on ``times``.  All integrals are running trapezoids,
    g(0) = 1 and tau(0) = tau0.
    """
    times = np.asarray(times, dtype=np.float64)
    omega_norm = np.asarray(omega_norm, dtype=np.float64)
    b_of_t = np.asarray(b_of_t, dtype=np.float64)
    if not (times.shape == omega_norm.shape == b_of_t.shape) or times.ndim != 1:
        raise ConfigError("times, omega_norm and b_of_t must be 1-D and equal length")
    if times.size == 0:
        raise ConfigError("need at least one time sample")
    if not (tau0 > 0):
        raise ConfigError("tau0 must be positive", key_path="tau0")
    if sqrt_y0 < 0:
        raise ConfigError("sqrt_y0 must be nonnegative")
    # clip the exponent so g stays finite; once the budget explodes the
    # bound is ~0 anyway and the clip only keeps the arithmetic NaN-free
    logg = np.minimum(c_user * cumulative_trapezoid(b_of_t, times), 700.0)
    g = np.exp(logg)
    with np.errstate(over="ignore"):
        a = g * (sqrt_y0 + c_user * (1.0 + tau0)
                 * cumulative_trapezoid(omega_norm**2 / g, times))
        atilde = a + chi * a**2
        tau = 1.0 / (g * (1.0 / tau0 + c_user
                          * cumulative_trapezoid((omega_norm + atilde) / g, times)))
    return NpeRadiusBudget(tau0=tau0, c_user=c_user, chi=chi, sqrt_y0=sqrt_y0,
                           times=times, b_of_t=b_of_t, g_of_t=g, a_of_t=a,
                           atilde_of_t=atilde, tau_of_t=tau)


def grad_u_linf(u: VectorField) -> float:
    """Grid max of the Frobenius magnitude of the velocity gradient."""
    g11 = to_physical(gradient(u.x).x)
    g12 = to_physical(gradient(u.x).y)
    g21 = to_physical(gradient(u.y).x)
    g22 = to_physical(gradient(u.y).y)
    return float(np.max(np.sqrt(g11**2 + g12**2 + g21**2 + g22**2)))


def npe_budget_ingredients(state: SimState, m: float) -> tuple[float, float, float, float]:
    """(||Lambda^{m-1} omega||, rho part of B, ||Lambda^{m-1} u||, ||grad u||_inf)."""
    d = state.require_derived()
    om = norm_gevrey(state.fluid.omega, 0.0, m - 1)
    rho_n = norm_gevrey(d.rho, 0.0, m - 1)
    u_n = float(np.hypot(norm_gevrey(d.u.x, 0.0, m - 1),
                         norm_gevrey(d.u.y, 0.0, m - 1)))
    return om, rho_n + rho_n**2, u_n, grad_u_linf(d.u)


def sqrt_y_value(state: SimState, tau: float, m: float) -> float:
    """sqrt of y(t) = sum_i ||e^{tau L} L^m c_i||^2 + ||e^{tau L} L^{m-1} omega||^2."""
    y = sum(norm_gevrey(sp.c, tau, m)**2 for sp in state.species)
    if state.is_euler:
        y += norm_gevrey(state.fluid.omega, tau, m - 1)**2
    return float(np.sqrt(y))


def species_chi(state: SimState) -> float:
    """1 when ions are present (any nonzero c_i), else 0."""
    total = sum(norm_l2(sp.c) for sp in state.species)
    return 1.0 if total > 1e-14 else 0.0


# ---------------------------------------------------------------------------
# Gronwall ledgers


@dataclass(frozen=True)
class GronwallReport:
    """Observed quantity vs its Gronwall-type bound along a run."""

    model: str
    times: np.ndarray
    observed: np.ndarray
    bound: np.ndarray
    margin: np.ndarray
    negative_margin_times: tuple[float, ...]
    details: dict


def npd_growth_exponent(times, grad_rho_sq, delta_c_sq_per_species,
                        l4_sq_per_species, c_user: float = 1.0) -> np.ndarray:
    """L(t) = C*sup_s<=t(||grad rho||^2) * sum_i int ||Lap c_i||^2
    + int ||grad rho||^2 + sum_i int ||c_i||_L4^2 (running trapezoids)."""
    times = np.asarray(times, dtype=np.float64)
    grad_rho_sq = np.asarray(grad_rho_sq, dtype=np.float64)
    sup_grad = np.maximum.accumulate(grad_rho_sq)
    total_delta = np.zeros_like(times)
    for series in delta_c_sq_per_species:
        total_delta += cumulative_trapezoid(series, times)
    total_l4 = np.zeros_like(times)
    for series in l4_sq_per_species:
        total_l4 += cumulative_trapezoid(series, times)
    return (c_user * sup_grad * total_delta
            + cumulative_trapezoid(grad_rho_sq, times) + total_l4)


def npd_ledger(history, m: float, c_user: float = 1.0) -> GronwallReport:
    """Darcy ledger: sum_i ||Lambda^m c_i||^2 vs exp(L(t)) * initial value."""
    times = np.array([t for t, _ in history], dtype=np.float64)
    states = [s for _, s in history]
    observed = np.array([sum(norm_gevrey(sp.c, 0.0, m)**2 for sp in st.species)
                         for st in states])
    grad_rho_sq = np.array([norm_gevrey(st.require_derived().rho, 0.0, 1)**2
                            for st in states])
    n_sp = len(states[0].species)
    delta_sq = [np.array([norm_gevrey(st.species[i].c, 0.0, 2)**2 for st in states])
                for i in range(n_sp)]
    l4_sq = [np.array([norm_l4(st.species[i].c)**2 for st in states])
             for i in range(n_sp)]
    big_l = npd_growth_exponent(times, grad_rho_sq, delta_sq, l4_sq, c_user)
    with np.errstate(over="ignore"):  # exp(L) may saturate to inf; margin stays valid
        bound = np.exp(big_l) * observed[0]
    margin = bound - observed
    neg = tuple(float(t) for t, mg in zip(times, margin) if mg < 0)
    return GronwallReport(model="NPD", times=times, observed=observed,
                          bound=bound, margin=margin,
                          negative_margin_times=neg,
                          details={"L": big_l, "grad_rho_sq": grad_rho_sq})


def npe_ledger(history, m: float, tau0: float,
               c_user: float = 1.0) -> GronwallReport:
    """Euler ledger: sqrt(y(t)) at the running tau(t) vs A(t)."""
    times = np.array([t for t, _ in history], dtype=np.float64)
    states = [s for _, s in history]
    chi = species_chi(states[0])
    mean_bar = sum(sp.c.coeffs[0, 0].real**2 for sp in states[0].species)
    om = np.empty_like(times)
    b = np.empty_like(times)
    for j, st in enumerate(states):
        om_j, rho_part, u_n, gu = npe_budget_ingredients(st, m)
        om[j] = om_j
        b[j] = rho_part + chi * (u_n**2 + 1.0) + gu + mean_bar
    sqrt_y0 = sqrt_y_value(states[0], tau0, m)
    budget = npe_radius_bound(times, om, b, sqrt_y0, tau0=tau0,
                              c_user=c_user, chi=chi)
    observed = np.array([sqrt_y_value(st, float(tau), m)
                         for st, tau in zip(states, budget.tau_of_t)])
    margin = budget.a_of_t - observed
    neg = tuple(float(t) for t, mg in zip(times, margin) if mg < 0)
    return GronwallReport(model="NPE", times=times, observed=observed,
                          bound=budget.a_of_t, margin=margin,
                          negative_margin_times=neg,
                          details={"tau": budget.tau_of_t, "g": budget.g_of_t,
                                   "B": budget.b_of_t,
                                   "Atilde": budget.atilde_of_t})


def gronwall_ledger(history, m: float, tau0: float = 1.0,
                    c_user: float = 1.0) -> GronwallReport:
    """Evaluate both sides of the model's Gronwall bound along a run."""
    if not history:
        raise ConfigError("empty history")
    state0 = history[0][1]
    if state0.is_euler:
        return npe_ledger(history, m, tau0, c_user)
    return npd_ledger(history, m, c_user)


# ---------------------------------------------------------------------------
# Gevrey energy balance


def _weighted_inner(a: SpectralField, b: SpectralField, tau: float,
                    m: float) -> float:
    """(e^{tau L} L^m a, e^{tau L} L^m b)_{L2}."""
    g = a.grid
    w2 = (gevrey_weight(g, tau) * g._kmag_safe**m)**2
    w2[0, 0] = 0.0 if m != 0 else 1.0
    return FOUR_PI_SQ * float(np.real(np.sum(w2 * a.coeffs * np.conj(b.coeffs))))


def _gevrey_energy(state: SimState, tau: float, m: float) -> float:
    return 0.5 * sqrt_y_value(state, tau, m)**2


def _gevrey_energy_rate(state: SimState, tau: float, m: float,
                        tau_prime: float) -> float:
    """Right-hand side of the Gevrey balance at one state.

    The nonlinear inner products reuse the exact dealiased helpers the
    stepper evaluates, so the balance holds up to time discretization.
    """
    d = state.require_derived()
    gphi = gradient(d.phi)
    rate = 0.0
    for sp in state.species:
        rate -= sp.D * norm_gevrey(sp.c, tau, m + 1)**2
        if tau_prime != 0.0:
            rate += tau_prime * norm_gevrey(sp.c, tau, m + 0.5)**2
        # transport: -(e^{tau L} L^m u.grad c', e^{tau L} L^m c')
        rate -= _weighted_inner(transport_div(d.u, sp.c), sp.c, tau, m)
        # migration, mean-free part
        c_mean = sp.c.coeffs[0, 0]
        cp = np.array(sp.c.coeffs)
        cp[0, 0] = 0.0
        cp_f = SpectralField(state.grid, cp)
        rate += sp.D * sp.z * _weighted_inner(migration_div(cp_f, gphi),
                                              sp.c, tau, m)
        # migration, mean part: D z mean(c) * (e^{tau L} L^m Lap(phi), ...)
        lap_phi = np.array(-dealias(d.rho).coeffs)
        lap_phi[0, 0] = 0.0
        rate += (sp.D * sp.z * c_mean.real
                 * _weighted_inner(SpectralField(state.grid, lap_phi),
                                   sp.c, tau, m))
    if state.is_euler:
        om = state.fluid.omega
        if tau_prime != 0.0:
            rate += tau_prime * norm_gevrey(om, tau, m - 0.5)**2
        rate -= _weighted_inner(transport_div(d.u, om), om, tau, m - 1)
        rate -= _weighted_inner(electric_jacobian(d.rho, d.phi), om, tau, m - 1)
    return rate


def gevrey_balance_residual(state_a: SimState, state_b: SimState, tau: float,
                            m: float, tau_prime: float = 0.0) -> float:
    """Defect of the Gevrey energy balance between two nearby states.

    Returns |dE/dt - RHS| / max(|dE/dt|, |RHS|, eps) with dE/dt the
    difference quotient of E = y/2 between the states and RHS the
    trapezoid average of the balance's right-hand side.  Second-order in
    the state spacing: halving dt shrinks the residual about 4x.
    """
    dt = state_b.time - state_a.time
    if dt <= 0:
        raise TimeGridError("state_b must be later than state_a")
    lhs = (_gevrey_energy(state_b, tau, m) - _gevrey_energy(state_a, tau, m)) / dt
    rhs = 0.5 * (_gevrey_energy_rate(state_a, tau, m, tau_prime)
                 + _gevrey_energy_rate(state_b, tau, m, tau_prime))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-30)
