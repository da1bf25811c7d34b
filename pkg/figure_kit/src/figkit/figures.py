"""Render the four standard figure kinds from run artifacts.

Everything here is batch/display-only: a ``FigureSpec`` names input files,
a kind, and an output image; ``render`` reads the documented CSV formats
and writes a PNG.  Rendering is deterministic — identical inputs produce
byte-identical images — so figures can be diffed in CI.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")  # headless + deterministic; must precede pyplot
import matplotlib.pyplot as plt
import numpy as np

from .errors import EmptySeriesError, SchemaMismatchError
from .tables import read_invariants, read_radius, read_spectrum

KINDS = ("norms", "spectrum", "radius", "invariants")
DEFAULT_NOISE_FLOOR = 1e-14
_NORM_PREFIXES = ("L2_", "L4_", "Linf_", "H1_", "Hm_")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: inputs, figure kind, output path, axis options."""

    kind: str
    inputs: tuple[Path, ...]
    output: Path
    fit_band: tuple[int, int] | None = None   # spectrum kind only
    noise_floor: float = DEFAULT_NOISE_FLOOR
    logy: bool | None = None                  # None = kind default
    title: str | None = None
    dpi: int = 110


@dataclass(frozen=True)
class RenderResult:
    """Where the image went plus machine-readable facts about the plot."""

    path: Path
    details: dict = field(default_factory=dict)


def fit_decay(shell: np.ndarray, k_at_max: np.ndarray,
              amplitude: np.ndarray, fit_band: tuple[int, int],
              noise_floor: float = DEFAULT_NOISE_FLOOR,
              ) -> tuple[float, float, float]:
    """Least-squares exponential-decay fit on a shell spectrum.

    Fits log(amplitude) against k_at_max over shells in ``fit_band``
    (inclusive), ignoring shells at or below ``noise_floor`` — the same
    convention the solver uses for its radius estimate, so the fitted
    rate is directly comparable with the radius CSV's tau_est column.
    Returns (tau, r_squared, intercept) with tau = max(0, -slope).
    """
    lo, hi = fit_band
    if not (0 < lo < hi):
        raise ValueError("fit band must satisfy 0 < k_min < k_max")
    keep = (shell >= lo) & (shell <= hi) & (amplitude > noise_floor)
    n_keep = int(np.count_nonzero(keep))
    if n_keep < 4:
        raise EmptySeriesError(
            f"only {n_keep} usable shells in band [{lo}, {hi}] above noise "
            f"floor {noise_floor:g}; need >= 4 for a decay fit")
    x = k_at_max[keep]
    y = np.log(amplitude[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot <= 1e-30:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return max(0.0, -float(slope)), r2, float(intercept)


def deficit_spans(time: np.ndarray, tau_est: np.ndarray,
                  tau_theory: np.ndarray) -> list[tuple[float, float]]:
    """Contiguous time spans (by sample) where the estimate sits below
    the certified bound.  NaN estimates never count as a deficit."""
    below = np.isfinite(tau_est) & (tau_est < tau_theory)
    spans = []
    start = None
    for t, flag in zip(time, below):
        if flag and start is None:
            start = float(t)
        elif not flag and start is not None:
            spans.append((start, float(prev)))
            start = None
        prev = t
    if start is not None:
        spans.append((start, float(time[-1])))
    return spans


def _new_axes(spec: FigureSpec, default_title: str, nrows: int = 1):
    fig, axes = plt.subplots(nrows, 1, figsize=(7.0, 4.5 if nrows == 1
                                                else 6.5), sharex=True)
    fig.suptitle(spec.title if spec.title is not None else default_title)
    return fig, axes


def _finish(fig, spec: FigureSpec) -> None:
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, dpi=spec.dpi,
                metadata={"Software": "figkit"})  # fixed text chunk
    plt.close(fig)


def _render_norms(spec: FigureSpec) -> RenderResult:
    header, cols = read_invariants(spec.inputs[0])
    names = [n for n in header if n.startswith(_NORM_PREFIXES)]
    if not names:
        raise SchemaMismatchError(
            f"{spec.inputs[0]}: no norm columns (L2_*/Linf_*/H1_*/...)")
    fig, ax = _new_axes(spec, "norm histories")
    t = cols["time"]
    for name in names:
        ax.plot(t, cols[name], label=name, linewidth=1.2)
    positive = all(np.all(cols[n] > 0) for n in names)
    if spec.logy or (spec.logy is None and positive):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    _finish(fig, spec)
    return RenderResult(spec.output, {
        "columns": names,
        "final": {n: float(cols[n][-1]) for n in names}})


def _render_spectrum(spec: FigureSpec) -> RenderResult:
    fig, ax = _new_axes(spec, "shell spectra (combined over fields)")
    last = None
    for path in spec.inputs:
        fields = read_spectrum(path)
        if "combined" not in fields:
            raise SchemaMismatchError(f"{path}: no 'combined' block; not a "
                                      "full spectrum dump")
        blk = fields["combined"]
        show = (blk["shell"] >= 1) & (blk["amplitude"] > 0)
        ax.semilogy(blk["k_at_max"][show], blk["amplitude"][show],
                    marker=".", linewidth=1.0, label=Path(path).stem)
        last = blk
    details: dict = {"files": [str(p) for p in spec.inputs]}
    if spec.fit_band is not None:
        tau, r2, intercept = fit_decay(last["shell"], last["k_at_max"],
                                       last["amplitude"], spec.fit_band,
                                       spec.noise_floor)
        lo, hi = spec.fit_band
        kk = np.linspace(lo, hi, 64)
        ax.semilogy(kk, np.exp(intercept - tau * kk), "k--", linewidth=1.0,
                    label=f"fit: e^(-{tau:.3f} k), R^2={r2:.3f}")
        details.update(tau_fit=tau, fit_r2=r2, fit_band=list(spec.fit_band))
    ax.set_xlabel("|k| at shell maximum")
    ax.set_ylabel("shell max |f_k|")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    _finish(fig, spec)
    return RenderResult(spec.output, details)


def _render_radius(spec: FigureSpec) -> RenderResult:
    cols = read_radius(spec.inputs[0])
    t, est, theory = cols["time"], cols["tau_est"], cols["tau_theory"]
    ok = np.isfinite(est)
    if not np.any(ok):
        raise EmptySeriesError(
            f"{spec.inputs[0]}: every tau_est is NaN; nothing to overlay")
    fig, ax = _new_axes(spec, "analyticity radius: estimate vs bound")
    ax.plot(t[ok], est[ok], marker="o", markersize=3, linewidth=1.2,
            label="tau_est (spectral fit)")
    ax.plot(t, theory, linestyle="--", linewidth=1.4,
            label="tau_theory (certified)")
    # flag where the measured radius dips under the certified bound
    shade = ok & (est < theory)
    ax.fill_between(t, theory, np.where(ok, est, theory), where=shade,
                    color="tab:red", alpha=0.3, interpolate=True,
                    label="estimate below bound")
    if spec.logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("radius")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, spec)
    return RenderResult(spec.output, {
        "deficit_spans": deficit_spans(t, est, theory),
        "tau_est_final": float(est[ok][-1]),
        "tau_theory_final": float(theory[-1])})


def _render_invariants(spec: FigureSpec) -> RenderResult:
    header, cols = read_invariants(spec.inputs[0])
    masses = [n for n in header if n.startswith("mass_c")]
    flows = ("mean_u_x", "mean_u_y", "force_mean_x", "force_mean_y")
    fig, (ax_m, ax_f) = _new_axes(spec, "conserved quantities", nrows=2)
    t = cols["time"]
    for name in masses:
        ax_m.plot(t, cols[name], label=name, linewidth=1.2)
    ax_m.set_ylabel("species mass")
    ax_m.grid(alpha=0.3)
    ax_m.legend(fontsize=8)
    for name in flows:
        ax_f.plot(t, cols[name], label=name, linewidth=1.2)
    ax_f.set_xlabel("t")
    ax_f.set_ylabel("mean flow / force")
    ax_f.grid(alpha=0.3)
    ax_f.legend(fontsize=8, ncol=2)
    _finish(fig, spec)
    drift = {n: float(np.max(np.abs(cols[n] - cols[n][0]))) for n in masses}
    return RenderResult(spec.output, {"mass_drift": drift})


_RENDERERS = {"norms": _render_norms, "spectrum": _render_spectrum,
              "radius": _render_radius, "invariants": _render_invariants}


def render(spec: FigureSpec) -> RenderResult:
    """Draw one figure; returns where it went plus plot facts.

    Raises SchemaMismatchError / EmptySeriesError for bad inputs,
    FileNotFoundError for missing ones, ValueError for a bad spec.
    """
    if spec.kind not in KINDS:
        raise ValueError(f"unknown figure kind {spec.kind!r}; "
                         f"expected one of {KINDS}")
    if not spec.inputs:
        raise ValueError("figure spec lists no input files")
    if spec.kind in ("norms", "radius", "invariants") and len(spec.inputs) != 1:
        raise ValueError(f"{spec.kind} figures take exactly one input file")
    if spec.output.suffix.lower() != ".png":
        raise ValueError("output must be a .png path (deterministic Agg "
                         "rendering is only guaranteed for PNG)")
    for path in spec.inputs:
        if not Path(path).is_file():
            raise FileNotFoundError(f"input file not found: {path}")
    return _RENDERERS[spec.kind](spec)
