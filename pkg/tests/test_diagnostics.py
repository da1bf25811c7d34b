"""Diagnostics: radius estimation, theoretical bounds, Gronwall ledgers and
the Gevrey energy balance."""

import numpy as np
import pytest

from helpers import band_field, npd_state, npe_state
from npflow.diagnostics import (combined_shell_spectrum, cumulative_trapezoid,
                                gevrey_balance_residual, grad_u_linf,
                                gronwall_ledger, invariant_report,
                                npd_growth_exponent, npd_ledger,
                                npd_radius_bound, npe_ledger, npe_radius_bound,
                                radius_estimate, radius_fit, shell_spectrum,
                                species_chi, sqrt_y_value)
from npflow.errors import (ConfigError, InsufficientShellsError, TimeGridError)
from npflow.models import (DarcyFluid, EulerFluid, IonSpecies, make_state)
from npflow.spectral import (SpectralField, constant_field, make_grid,
                             norm_gevrey, norm_l2, to_spectral, zero_field)
from npflow.stepping import StepperConfig, run, step


def decaying_field(grid, rate, power=0.0, floor_mask=True):
    """|f_k| = |k|^{-power} * exp(-rate*|k|) inside the dealiased band."""
    amps = grid._kmag_safe**(-power) * np.exp(-rate * grid.kmag)
    amps[0, 0] = 1.0
    if floor_mask:
        amps = amps * grid.dealias_mask
    return SpectralField(grid, amps.astype(complex))


# ---------------------------------------------------------------------------
# quadrature


def test_cumulative_trapezoid_matches_numpy():
    x = np.linspace(0.0, 2.0, 301)
    y = np.cos(3 * x) + x**2
    got = cumulative_trapezoid(y, x)
    want = np.array([np.trapezoid(y[:j + 1], x[:j + 1]) for j in range(len(x))])
    assert np.max(np.abs(got - want)) < 1e-12
    with pytest.raises(TimeGridError):
        cumulative_trapezoid(y[:3], np.array([0.0, 1.0, 0.5]))


# ---------------------------------------------------------------------------
# shell spectra and radius fits


def test_shell_spectrum_hand_case():
    grid = make_grid(16)
    c = np.zeros((16, 16), dtype=complex)
    c[0, 0] = 2.0
    c[1, 0] = 0.5
    c[3 % 16, 4 % 16] = 0.2   # |k| = 5
    c[5, 0] = 0.1             # also shell 5, smaller
    spec = shell_spectrum(SpectralField(grid, c))
    by_shell = dict(zip(spec.shells.tolist(), spec.amplitude.tolist()))
    assert by_shell[0] == 2.0
    assert by_shell[1] == 0.5
    assert by_shell[5] == 0.2
    k_at = dict(zip(spec.shells.tolist(), spec.k_at_max.tolist()))
    assert k_at[5] == 5.0


def test_combined_shell_spectrum_takes_pointwise_max():
    grid = make_grid(16)
    a = np.zeros((16, 16), dtype=complex)
    b = np.zeros((16, 16), dtype=complex)
    a[2, 0] = 0.3
    b[0, 2] = 0.7
    spec = combined_shell_spectrum([SpectralField(grid, a),
                                    SpectralField(grid, b)])
    by_shell = dict(zip(spec.shells.tolist(), spec.amplitude.tolist()))
    assert by_shell[2] == 0.7


def test_radius_fit_recovers_exponential_rate_exactly():
    grid = make_grid(64)
    f = decaying_field(grid, 0.3)
    tau, r2 = radius_estimate(f, (2, 21))
    assert tau == pytest.approx(0.3, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_radius_fit_within_spec_tolerance_band():
    # acceptance-style sweep: 5% + 0.01 absolute across rates
    grid = make_grid(64)
    for rate in (0.05, 0.2, 0.8):
        f = decaying_field(grid, rate)
        tau, _ = radius_estimate(f, (2, 21))
        assert abs(tau - rate) <= 0.05 * rate + 0.01


def test_radius_fit_polynomial_decay_reads_near_zero():
    # |k|^-4 has no exponential decay; at n = 1024 over shells [200, 341]
    # the local log-slope 4/|k| is at most 0.02
    grid = make_grid(1024)
    f = decaying_field(grid, 0.0, power=4.0)
    tau, _ = radius_estimate(f, (200, 341))
    assert 0.0 <= tau <= 0.02


def test_radius_fit_never_negative():
    grid = make_grid(32)
    growing = SpectralField(grid, np.exp(0.1 * grid.kmag)
                            * grid.dealias_mask + 0j)
    tau, _ = radius_fit(shell_spectrum(growing), (2, 10))
    assert tau == 0.0


def test_radius_fit_insufficient_shells():
    grid = make_grid(32)
    c = np.zeros((32, 32), dtype=complex)
    c[1, 0] = 1.0
    c[2, 0] = 0.5
    with pytest.raises(InsufficientShellsError):
        radius_fit(shell_spectrum(SpectralField(grid, c)), (1, 10))
    # below the noise floor shells do not count either
    f = decaying_field(grid, 3.0)
    with pytest.raises(InsufficientShellsError):
        radius_fit(shell_spectrum(f), (2, 10), noise_floor=1e-2)


def test_radius_estimate_band_must_stay_dealiased():
    grid = make_grid(32)
    with pytest.raises(ConfigError):
        radius_estimate(decaying_field(grid, 0.3), (2, 14))


# ---------------------------------------------------------------------------
# theoretical bounds


def test_npd_bound_reference_values():
    # staircase 0.5*min(D)*min(t, T0/2) at min(D) = 2, T0 = 4
    assert npd_radius_bound(0.0, (2.0, 4.0), 4.0) == 0.0
    assert npd_radius_bound(1.0, (2.0, 4.0), 4.0) == 1.0
    assert npd_radius_bound(10.0, (2.0, 4.0), 4.0) == 2.0
    with pytest.raises(ConfigError):
        npd_radius_bound(1.0, (0.0,), 4.0)
    with pytest.raises(ConfigError):
        npd_radius_bound(-1.0, (1.0,), 4.0)


def test_npe_bound_closed_form_instance():
    """omega = 1, B = 1, sqrt(y0) = 0, tau0 = C = 1 gives g = e^t and
    A = 2 e^t (1 - e^{-t})."""
    times = np.linspace(0.0, 1.0, 1001)
    ones = np.ones_like(times)
    budget = npe_radius_bound(times, ones, ones, 0.0, tau0=1.0)
    want_a = 2.0 * np.exp(times) * (1.0 - np.exp(-times))
    assert np.max(np.abs(budget.a_of_t - want_a)) < 1e-6
    assert np.max(np.abs(budget.g_of_t - np.exp(times))) < 1e-6
    assert budget.tau_of_t[0] == 1.0
    assert np.all(np.diff(budget.tau_of_t) <= 0)


def test_npe_bound_matches_finer_quadrature():
    times = np.linspace(0.0, 1.0, 1001)
    om = 1.0 + times**2
    b = 1.0 + times
    coarse = npe_radius_bound(times, om, b, 0.5, tau0=0.8)
    fine_t = np.linspace(0.0, 1.0, 10001)
    fine = npe_radius_bound(fine_t, 1.0 + fine_t**2, 1.0 + fine_t, 0.5,
                            tau0=0.8)
    assert np.max(np.abs(coarse.tau_of_t - fine.tau_of_t[::10])) < 1e-6


def test_npe_bound_survives_huge_budgets():
    # the clip keeps g finite; tau collapses to ~0 instead of NaN
    times = np.linspace(0.0, 1.0, 101)
    big = np.full_like(times, 2000.0)
    budget = npe_radius_bound(times, big, big, 1.0, tau0=1.0)
    assert np.all(np.isfinite(budget.tau_of_t))
    assert budget.tau_of_t[-1] < 1e-200


def test_grad_u_linf_taylor_green():
    state = make_state(make_grid(32), (),
                       EulerFluid(to_spectral(make_grid(32),
                                              -2.0 * np.sin(make_grid(32).x1)
                                              * np.sin(make_grid(32).x2))))
    assert grad_u_linf(state.require_derived().u) == pytest.approx(
        np.sqrt(2.0), rel=1e-12)


def test_species_chi():
    grid = make_grid(16)
    empty = make_state(grid, (IonSpecies(1.0, 1.0, zero_field(grid)),),
                       DarcyFluid())
    assert species_chi(empty) == 0.0
    assert species_chi(npd_state(16)) == 1.0


def test_sqrt_y_combines_species_and_vorticity():
    state = npe_state(16, kmax=3)
    tau, m = 0.1, 3.0
    want = np.sqrt(sum(norm_gevrey(sp.c, tau, m)**2 for sp in state.species)
                   + norm_gevrey(state.fluid.omega, tau, m - 1)**2)
    assert sqrt_y_value(state, tau, m) == pytest.approx(want, rel=1e-15)


# ---------------------------------------------------------------------------
# invariant reports


def test_invariant_report_masses_and_dissipation():
    state = npd_state(16)
    cfg = StepperConfig(dt=0.01, t_end=0.2)
    traj = run(state, cfg, cadence=4)
    report = None
    reports = []
    for _, st in traj.snapshots:
        report = invariant_report(st, report, m_star=3)
        reports.append(report)
    for rp, (t, st) in zip(reports, traj.snapshots):
        for mass, sp in zip(rp.mass, st.species):
            assert mass == 4 * np.pi**2 * sp.c.coeffs[0, 0].real
    times = np.array([rp.time for rp in reports])
    integrand = np.array([rp.dissipation_integrand for rp in reports])
    assert reports[-1].dissipation == pytest.approx(
        np.trapezoid(integrand, times), rel=1e-12)
    assert "u" in reports[-1].norms  # Darcy reports velocity norms
    with pytest.raises(TimeGridError):
        invariant_report(traj.snapshots[0][1], reports[-1])


def test_invariant_report_norm_consistency_across_resolutions():
    # the same smooth initial data at n = 32 and n = 48 must produce
    # near-identical invariants after a short run
    def run_at(n):
        grid = make_grid(n)
        vals = 1.5 + 0.4 * np.cos(grid.x1) + 0.3 * np.sin(2 * grid.x2)
        c = to_spectral(grid, vals)
        state = make_state(grid, (IonSpecies(1.0, 0.5, c),
                                  IonSpecies(-1.0, 1.0, c)), DarcyFluid())
        traj = run(state, StepperConfig(dt=0.01, t_end=0.1))
        return invariant_report(traj.snapshots[-1][1])

    a, b = run_at(32), run_at(48)
    for key in ("L2", "Linf", "H1"):
        assert a.norms["c1"][key] == pytest.approx(b.norms["c1"][key],
                                                   rel=1e-2)


# ---------------------------------------------------------------------------
# Gronwall ledgers


def history_of(state, dt, t_end, cadence=2):
    traj = run(state, StepperConfig(dt=dt, t_end=t_end), cadence=cadence)
    return traj.snapshots


def test_npd_ledger_margin_nonnegative():
    history = history_of(npd_state(16, scale=0.4), 0.01, 0.3)
    ledger = npd_ledger(history, m=3, c_user=1.0)
    assert ledger.model == "NPD"
    assert ledger.bound[0] == pytest.approx(ledger.observed[0], rel=1e-14)
    assert np.all(ledger.margin >= 0)
    assert ledger.negative_margin_times == ()


def test_npd_growth_exponent_matches_independent_quadrature():
    history = history_of(npd_state(16, scale=0.4), 0.01, 0.3)
    times = np.array([t for t, _ in history])
    states = [s for _, s in history]
    gr2 = np.array([norm_gevrey(s.require_derived().rho, 0.0, 1)**2
                    for s in states])
    d2 = [np.array([norm_gevrey(s.species[i].c, 0.0, 2)**2 for s in states])
          for i in range(2)]
    from npflow.spectral import norm_l4
    l4 = [np.array([norm_l4(s.species[i].c)**2 for s in states])
          for i in range(2)]
    got = npd_growth_exponent(times, gr2, d2, l4, c_user=1.3)

    sup = np.maximum.accumulate(gr2)
    want = np.zeros_like(times)
    for j in range(len(times)):
        t = times[:j + 1]
        want[j] = (1.3 * sup[j] * sum(np.trapezoid(s[:j + 1], t) for s in d2)
                   + np.trapezoid(gr2[:j + 1], t)
                   + sum(np.trapezoid(s[:j + 1], t) for s in l4))
    assert np.max(np.abs(got - want)) <= 1e-8 * max(1.0, np.max(np.abs(want)))


def test_npe_ledger_margin_nonnegative():
    history = history_of(npe_state(32, kmax=4), 0.01, 0.2, cadence=4)
    ledger = npe_ledger(history, m=3, tau0=0.5)
    assert ledger.model == "NPE"
    assert np.all(ledger.margin >= 0)
    tau = ledger.details["tau"]
    assert tau[0] == 0.5
    assert np.all(np.diff(tau) <= 0)


def test_gronwall_ledger_dispatches_on_model():
    npd_hist = history_of(npd_state(16, scale=0.3), 0.01, 0.1)
    assert gronwall_ledger(npd_hist, 3).model == "NPD"
    npe_hist = history_of(npe_state(16, kmax=3), 0.01, 0.05)
    assert gronwall_ledger(npe_hist, 3).model == "NPE"
    with pytest.raises(ConfigError):
        gronwall_ledger([], 3)


# ---------------------------------------------------------------------------
# Gevrey energy balance


def test_balance_residual_pure_diffusion():
    grid = make_grid(32)
    c = band_field(grid, seed=6, kmax=5, mean=1.5)
    state = make_state(grid, (IonSpecies(0.0, 1.0, c),), DarcyFluid())
    nxt = step(state, StepperConfig(dt=5e-5, t_end=1.0))
    assert gevrey_balance_residual(state, nxt, tau=0.05, m=3) < 1e-6


def test_balance_residual_second_order_in_dt():
    state = npe_state(32, seed=5, kmax=5)
    cfg = StepperConfig(dt=1.0, t_end=10.0)

    def residual(dt):
        nxt = step(state, cfg, dt=dt)
        return gevrey_balance_residual(state, nxt, tau=0.05, m=3)

    values = [residual(dt) for dt in (2e-3, 1e-3, 5e-4)]
    for coarse, fine in zip(values, values[1:]):
        assert 3.2 < coarse / fine < 4.8


def test_balance_residual_requires_ordered_states():
    state = npd_state(16)
    nxt = step(state, StepperConfig(dt=1e-3, t_end=1.0))
    with pytest.raises(TimeGridError):
        gevrey_balance_residual(nxt, state, tau=0.05, m=3)
