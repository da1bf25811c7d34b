"""Run configuration: strict YAML schema, canonical rendering, and
initial-condition builders.

Unknown keys are rejected and every validation error names the offending
key path (e.g. ``species[0].D``).  ``render_config`` emits a canonical
document: ``parse_config(render_config(cfg)) == cfg`` and re-rendering
reproduces the same bytes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .errors import ConfigError
from .models import (DarcyFluid, EulerFluid, IonSpecies, SimState, make_state)
from .spectral import (SpectralField, SpectralGrid, conjugate_reflection,
                       constant_field, dealias, hermitian_defect, make_grid,
                       to_physical, to_spectral, TWO_PI)
from .stepping import SCHEMES, StepperConfig

MODELS = ("NPE", "NPD")


# ---------------------------------------------------------------------------
# initial-condition specs


@dataclass(frozen=True)
class ConstantIC:
    value: float


@dataclass(frozen=True)
class ModeEntry:
    k: tuple[int, int]
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class ModesIC:
    modes: tuple[ModeEntry, ...]


@dataclass(frozen=True)
class RandomBandIC:
    k_min: int
    k_max: int
    amplitude: float
    decay: float = 0.0
    seed: int | None = None


@dataclass(frozen=True)
class BumpEntry:
    center: tuple[float, float]
    width: float
    amplitude: float


@dataclass(frozen=True)
class BumpsIC:
    bumps: tuple[BumpEntry, ...]
    base: float = 0.0


@dataclass(frozen=True)
class FileIC:
    path: str


InitialSpec = ConstantIC | ModesIC | RandomBandIC | BumpsIC | FileIC


@dataclass(frozen=True)
class SpeciesConfig:
    z: float
    D: float
    initial: InitialSpec


@dataclass(frozen=True)
class RunConfig:
    model: str
    n: int
    seed: int
    stepper: StepperConfig
    species: tuple[SpeciesConfig, ...]
    vorticity: InitialSpec | None = None
    cadence: int = 1
    output_dir: str | None = None
    c_user: float = 1.0
    tau0: float = 1.0
    T0: float = 1.0
    m_star: int = 3
    fit_band: tuple[int, int] = (2, 8)
    noise_floor: float = 1e-14
    gevrey_probes: tuple[tuple[float, float], ...] = ()


# ---------------------------------------------------------------------------
# strict document walking

_MISSING = object()


def _as_map(value, path):
    if not isinstance(value, dict):
        raise ConfigError("expected a mapping", key_path=path)
    return value


def _as_list(value, path):
    if not isinstance(value, list):
        raise ConfigError("expected a list", key_path=path)
    return value


def _take(doc: dict, key: str, path: str, default=_MISSING):
    if key in doc:
        return doc.pop(key)
    if default is _MISSING:
        raise ConfigError("missing required key", key_path=_join(path, key))
    return default


def _join(path: str, key: str) -> str:
    return key if not path else f"{path}.{key}"


def _no_extras(doc: dict, path: str) -> None:
    if doc:
        key = sorted(doc)[0]
        raise ConfigError("unknown key", key_path=_join(path, key))


def _as_float(value, path, *, minimum=None, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a number", key_path=path)
    v = float(value)
    if not np.isfinite(v):
        raise ConfigError("must be finite", key_path=path)
    if positive and not v > 0:
        raise ConfigError("must be positive", key_path=path)
    if minimum is not None and v < minimum:
        raise ConfigError(f"must be >= {minimum}", key_path=path)
    return v


def _as_int(value, path, *, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("expected an integer", key_path=path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}", key_path=path)
    return int(value)


def _as_bool(value, path):
    if not isinstance(value, bool):
        raise ConfigError("expected true/false", key_path=path)
    return value


def _as_str(value, path):
    if not isinstance(value, str) or not value:
        raise ConfigError("expected a non-empty string", key_path=path)
    return value


# ---------------------------------------------------------------------------
# parsing


def _parse_initial(doc, path, n) -> InitialSpec:
    doc = dict(_as_map(doc, path))
    kind = _as_str(_take(doc, "kind", path), _join(path, "kind"))
    if kind == "constant":
        spec = ConstantIC(value=_as_float(_take(doc, "value", path),
                                          _join(path, "value")))
    elif kind == "modes":
        entries = []
        raw = _as_list(_take(doc, "modes", path), _join(path, "modes"))
        if not raw:
            raise ConfigError("mode list must not be empty",
                              key_path=_join(path, "modes"))
        for i, ent in enumerate(raw):
            epath = f"{path}.modes[{i}]"
            ent = dict(_as_map(ent, epath))
            kraw = _as_list(_take(ent, "k", epath), _join(epath, "k"))
            if len(kraw) != 2:
                raise ConfigError("mode k must be a pair of integers",
                                  key_path=_join(epath, "k"))
            k = tuple(_as_int(x, _join(epath, "k")) for x in kraw)
            lo, hi = -n // 2 + 1, n // 2
            if not (lo <= k[0] <= hi and lo <= k[1] <= hi):
                raise ConfigError(
                    f"mode {k} outside the lattice [{lo}, {hi}]^2",
                    key_path=_join(epath, "k"))
            amp = _as_float(_take(ent, "amplitude", epath), _join(epath, "amplitude"))
            phase = _as_float(_take(ent, "phase", epath, 0.0), _join(epath, "phase"))
            _no_extras(ent, epath)
            entries.append(ModeEntry(k=k, amplitude=amp, phase=phase))
        spec = ModesIC(modes=tuple(entries))
    elif kind == "random_band":
        k_min = _as_int(_take(doc, "k_min", path), _join(path, "k_min"), minimum=1)
        k_max = _as_int(_take(doc, "k_max", path), _join(path, "k_max"), minimum=1)
        if k_max < k_min:
            raise ConfigError("k_max must be >= k_min", key_path=_join(path, "k_max"))
        if k_max > n / 3.0:
            raise ConfigError(f"k_max must stay in the dealiased band (<= n/3 = {n / 3.0:g})",
                              key_path=_join(path, "k_max"))
        amp = _as_float(_take(doc, "amplitude", path), _join(path, "amplitude"),
                        positive=True)
        decay = _as_float(_take(doc, "decay", path, 0.0), _join(path, "decay"),
                          minimum=0.0)
        seed = doc.pop("seed", None)
        if seed is not None:
            seed = _as_int(seed, _join(path, "seed"), minimum=0)
        spec = RandomBandIC(k_min=k_min, k_max=k_max, amplitude=amp,
                            decay=decay, seed=seed)
    elif kind == "bumps":
        base = _as_float(_take(doc, "base", path, 0.0), _join(path, "base"))
        raw = _as_list(_take(doc, "bumps", path), _join(path, "bumps"))
        if not raw:
            raise ConfigError("bump list must not be empty",
                              key_path=_join(path, "bumps"))
        entries = []
        for i, ent in enumerate(raw):
            epath = f"{path}.bumps[{i}]"
            ent = dict(_as_map(ent, epath))
            craw = _as_list(_take(ent, "center", epath), _join(epath, "center"))
            if len(craw) != 2:
                raise ConfigError("center must be a pair of coordinates",
                                  key_path=_join(epath, "center"))
            center = tuple(_as_float(x, _join(epath, "center")) for x in craw)
            width = _as_float(_take(ent, "width", epath), _join(epath, "width"),
                              positive=True)
            amp = _as_float(_take(ent, "amplitude", epath), _join(epath, "amplitude"))
            _no_extras(ent, epath)
            entries.append(BumpEntry(center=center, width=width, amplitude=amp))
        spec = BumpsIC(bumps=tuple(entries), base=base)
    elif kind == "file":
        spec = FileIC(path=_as_str(_take(doc, "path", path), _join(path, "path")))
    else:
        raise ConfigError(
            f"unknown kind {kind!r}; expected constant|modes|random_band|bumps|file",
            key_path=_join(path, "kind"))
    _no_extras(doc, path)
    return spec


def _parse_stepper(doc, path) -> StepperConfig:
    doc = dict(_as_map(doc, path))
    scheme = _as_str(_take(doc, "scheme", path, "IF-RK4"), _join(path, "scheme"))
    if scheme not in SCHEMES:
        raise ConfigError(f"must be one of {SCHEMES}", key_path=_join(path, "scheme"))
    dt = _as_float(_take(doc, "dt", path), _join(path, "dt"), positive=True)
    adaptive = _as_bool(_take(doc, "adaptive", path, False), _join(path, "adaptive"))
    cfl = _as_float(_take(doc, "cfl", path, 0.5), _join(path, "cfl"))
    if not (0 < cfl <= 1):
        raise ConfigError("must lie in (0, 1]", key_path=_join(path, "cfl"))
    t_end = _as_float(_take(doc, "t_end", path), _join(path, "t_end"), minimum=0.0)
    clip = _as_bool(_take(doc, "positivity_clip", path, False),
                    _join(path, "positivity_clip"))
    tol = _as_float(_take(doc, "positivity_tol", path, 1e-10),
                    _join(path, "positivity_tol"), minimum=0.0)
    _no_extras(doc, path)
    return StepperConfig(scheme=scheme, dt=dt, adaptive=adaptive, cfl=cfl,
                         t_end=t_end, positivity_clip=clip, positivity_tol=tol)


def parse_config_doc(doc: dict) -> RunConfig:
    doc = dict(_as_map(doc, ""))
    model = _as_str(_take(doc, "model", ""), "model")
    if model not in MODELS:
        raise ConfigError(f"must be one of {MODELS}", key_path="model")
    n = _as_int(_take(doc, "n", ""), "n")
    if n < 8 or n % 2 != 0:
        raise ConfigError("must be even and >= 8", key_path="n")
    seed = _as_int(_take(doc, "seed", "", 0), "seed", minimum=0)
    cadence = _as_int(_take(doc, "cadence", "", 1), "cadence", minimum=1)
    stepper = _parse_stepper(_take(doc, "stepper", ""), "stepper")
    species_raw = _as_list(_take(doc, "species", ""), "species")
    if not species_raw:
        raise ConfigError("need at least one species", key_path="species")
    species = []
    for i, ent in enumerate(species_raw):
        spath = f"species[{i}]"
        ent = dict(_as_map(ent, spath))
        z = _as_float(_take(ent, "z", spath), _join(spath, "z"))
        d = _as_float(_take(ent, "D", spath), _join(spath, "D"), positive=True)
        init = _parse_initial(_take(ent, "initial", spath),
                              _join(spath, "initial"), n)
        _no_extras(ent, spath)
        species.append(SpeciesConfig(z=z, D=d, initial=init))
    vort_raw = _take(doc, "vorticity", "", None)
    if vort_raw is not None and model != "NPE":
        raise ConfigError("only valid for model NPE", key_path="vorticity")
    vorticity = (_parse_initial(vort_raw, "vorticity", n)
                 if vort_raw is not None else None)
    output_dir = _take(doc, "output_dir", "", None)
    if output_dir is not None:
        output_dir = _as_str(output_dir, "output_dir")
    c_user = _as_float(_take(doc, "c_user", "", 1.0), "c_user", positive=True)
    tau0 = _as_float(_take(doc, "tau0", "", 1.0), "tau0", positive=True)
    t_zero = _as_float(_take(doc, "T0", "", 1.0), "T0", positive=True)
    m_star = _as_int(_take(doc, "m_star", "", 3), "m_star", minimum=1)
    band_raw = _take(doc, "fit_band", "", None)
    if band_raw is None:
        top = n // 3
        fit_band = (2, top) if top > 2 else (1, max(2, top))
    else:
        band_raw = _as_list(band_raw, "fit_band")
        if len(band_raw) != 2:
            raise ConfigError("expected [k_min, k_max]", key_path="fit_band")
        fit_band = (_as_int(band_raw[0], "fit_band", minimum=1),
                    _as_int(band_raw[1], "fit_band", minimum=2))
    if not fit_band[0] < fit_band[1]:
        raise ConfigError("k_min must be < k_max", key_path="fit_band")
    if fit_band[1] > n / 3.0:
        raise ConfigError(f"k_max must be <= n/3 = {n / 3.0:g}", key_path="fit_band")
    floor = _as_float(_take(doc, "noise_floor", "", 1e-14), "noise_floor",
                      positive=True)
    probes_raw = _take(doc, "gevrey_probes", "", [])
    probes = []
    for i, ent in enumerate(_as_list(probes_raw, "gevrey_probes")):
        ppath = f"gevrey_probes[{i}]"
        ent = dict(_as_map(ent, ppath))
        ptau = _as_float(_take(ent, "tau", ppath), _join(ppath, "tau"), minimum=0.0)
        pm = _as_float(_take(ent, "m", ppath), _join(ppath, "m"), minimum=0.0)
        _no_extras(ent, ppath)
        probes.append((ptau, pm))
    _no_extras(doc, "")
    return RunConfig(model=model, n=n, seed=seed, stepper=stepper,
                     species=tuple(species), vorticity=vorticity,
                     cadence=cadence, output_dir=output_dir, c_user=c_user,
                     tau0=tau0, T0=t_zero, m_star=m_star, fit_band=fit_band,
                     noise_floor=floor, gevrey_probes=tuple(probes))


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"not valid YAML: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    return parse_config_doc(doc)


# ---------------------------------------------------------------------------
# rendering


def _initial_doc(spec: InitialSpec) -> dict:
    if isinstance(spec, ConstantIC):
        return {"kind": "constant", "value": spec.value}
    if isinstance(spec, ModesIC):
        return {"kind": "modes",
                "modes": [{"k": [int(e.k[0]), int(e.k[1])],
                           "amplitude": e.amplitude, "phase": e.phase}
                          for e in spec.modes]}
    if isinstance(spec, RandomBandIC):
        out = {"kind": "random_band", "k_min": spec.k_min, "k_max": spec.k_max,
               "amplitude": spec.amplitude, "decay": spec.decay}
        if spec.seed is not None:
            out["seed"] = spec.seed
        return out
    if isinstance(spec, BumpsIC):
        return {"kind": "bumps", "base": spec.base,
                "bumps": [{"center": [e.center[0], e.center[1]],
                           "width": e.width, "amplitude": e.amplitude}
                          for e in spec.bumps]}
    if isinstance(spec, FileIC):
        return {"kind": "file", "path": spec.path}
    raise ConfigError(f"unknown initial spec {type(spec).__name__}")


def render_config(cfg: RunConfig) -> str:
    """Canonical YAML for a RunConfig; parse_config inverts it exactly."""
    doc: dict = {"model": cfg.model, "n": cfg.n, "seed": cfg.seed,
                 "cadence": cfg.cadence}
    if cfg.output_dir is not None:
        doc["output_dir"] = cfg.output_dir
    doc["stepper"] = {"scheme": cfg.stepper.scheme, "dt": cfg.stepper.dt,
                      "adaptive": cfg.stepper.adaptive, "cfl": cfg.stepper.cfl,
                      "t_end": cfg.stepper.t_end,
                      "positivity_clip": cfg.stepper.positivity_clip,
                      "positivity_tol": cfg.stepper.positivity_tol}
    doc["species"] = [{"z": s.z, "D": s.D, "initial": _initial_doc(s.initial)}
                      for s in cfg.species]
    if cfg.vorticity is not None:
        doc["vorticity"] = _initial_doc(cfg.vorticity)
    doc["c_user"] = cfg.c_user
    doc["tau0"] = cfg.tau0
    doc["T0"] = cfg.T0
    doc["m_star"] = cfg.m_star
    doc["fit_band"] = [cfg.fit_band[0], cfg.fit_band[1]]
    doc["noise_floor"] = cfg.noise_floor
    doc["gevrey_probes"] = [{"tau": t, "m": m} for t, m in cfg.gevrey_probes]
    return yaml.safe_dump(doc, sort_keys=False)


# ---------------------------------------------------------------------------
# initial-condition fields


def _symmetrize(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + conjugate_reflection(c))


def initial_condition(spec: InitialSpec, grid: SpectralGrid, *,
                      role: str = "concentration", seed: int = 0,
                      slot: int = 0) -> SpectralField:
    """Resolve an initial-condition spec to a band-limited field.

    Randomness derives from SeedSequence(seed, spawn_key=(slot,)) so each
    species slot draws an independent, order-independent stream.
    Concentrations are shifted up to be nonnegative on the grid (with a
    warning when the shift is material); vorticity is made mean-free.
    """
    n = grid.n
    if isinstance(spec, ConstantIC):
        field = constant_field(grid, spec.value)
    elif isinstance(spec, ModesIC):
        c = np.zeros((n, n), dtype=np.complex128)
        for e in spec.modes:
            c[e.k[0] % n, e.k[1] % n] += e.amplitude * np.exp(1j * e.phase)
        field = SpectralField(grid, _symmetrize(c))
    elif isinstance(spec, RandomBandIC):
        base_seed = spec.seed if spec.seed is not None else seed
        rng = np.random.default_rng(np.random.SeedSequence(base_seed,
                                                           spawn_key=(slot,)))
        c = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        shell = np.rint(grid.kmag)
        band = ((shell >= spec.k_min) & (shell <= spec.k_max)
                & grid.dealias_mask)
        c *= band * spec.amplitude * np.exp(-spec.decay * grid.kmag)
        c = _symmetrize(c)
        c[0, 0] = 0.0
        field = SpectralField(grid, c)
    elif isinstance(spec, BumpsIC):
        vals = np.full((n, n), float(spec.base))
        for b in spec.bumps:
            for sx in (-TWO_PI, 0.0, TWO_PI):
                for sy in (-TWO_PI, 0.0, TWO_PI):
                    d2 = ((grid.x1 - b.center[0] + sx)**2
                          + (grid.x2 - b.center[1] + sy)**2)
                    vals += b.amplitude * np.exp(-d2 / (2.0 * b.width**2))
        field = dealias(to_spectral(grid, vals))
    elif isinstance(spec, FileIC):
        raw = np.load(spec.path)
        if raw.shape != (n, n):
            raise ConfigError(
                f"field file has shape {raw.shape}, expected ({n}, {n})")
        field = SpectralField(grid, np.asarray(raw, dtype=np.complex128))
        if hermitian_defect(field) > 1e-12:
            raise ConfigError("field file is not Hermitian (not a real field)")
    else:
        raise ConfigError(f"unknown initial spec {type(spec).__name__}")

    if role == "concentration":
        vals = to_physical(field)
        lo = float(np.min(vals))
        if lo < 0.0:
            scale = max(1.0, float(np.max(np.abs(vals))))
            if lo < -1e-12 * scale:
                warnings.warn(
                    f"initial concentration dips to {lo:.3g}; shifting up by "
                    f"{-lo:.3g} to enforce nonnegativity", stacklevel=2)
            field = field + constant_field(grid, -lo)
    elif role == "vorticity":
        c = np.array(field.coeffs)
        c[0, 0] = 0.0
        field = SpectralField(grid, c)
    else:
        raise ConfigError(f"unknown initial-condition role {role!r}")
    return field


def build_initial_state(cfg: RunConfig) -> SimState:
    """Assemble the t = 0 state described by a RunConfig."""
    grid = make_grid(cfg.n)
    species = []
    for i, sc in enumerate(cfg.species):
        c = initial_condition(sc.initial, grid, role="concentration",
                              seed=cfg.seed, slot=i)
        species.append(IonSpecies(z=sc.z, D=sc.D, c=c))
    if cfg.model == "NPE":
        if cfg.vorticity is not None:
            omega = initial_condition(cfg.vorticity, grid, role="vorticity",
                                      seed=cfg.seed, slot=len(cfg.species))
        else:
            omega = constant_field(grid, 0.0)
        fluid: EulerFluid | DarcyFluid = EulerFluid(omega)
    else:
        fluid = DarcyFluid()
    return make_state(grid, tuple(species), fluid, 0.0)
