"""Pseudo-spectral solvers for ionic electrodiffusion coupled to 2-D
incompressible flow on the periodic box, plus the diagnostics used to
monitor conservation laws and the analyticity radius of solutions."""

from .config import (BumpsIC, ConstantIC, FileIC, ModeEntry, ModesIC,
                     RandomBandIC, RunConfig, SpeciesConfig,
                     build_initial_state, initial_condition, parse_config,
                     render_config)
from .diagnostics import (GronwallReport, InvariantReport, NpeRadiusBudget,
                          RadiusRecord, ShellSpectrum, combined_shell_spectrum,
                          cumulative_trapezoid, gevrey_balance_residual,
                          gronwall_ledger, invariant_report, npd_radius_bound,
                          npe_radius_bound, radius_estimate, radius_fit,
                          shell_spectrum, sqrt_y_value)
from .errors import (ConfigError, DivergenceError, DomainError,
                     GevreyOverflowError, InsufficientShellsError,
                     ModelUsageError, NpflowError, SchemaError, SnapshotError,
                     StaleStateError, TimeGridError)
from .models import (DarcyFluid, DerivedFields, EulerFluid, IonSpecies,
                     SimState, charge_density, darcy_velocity,
                     euler_vorticity_tendency, make_state, np_tendency,
                     velocity_from_vorticity, vorticity_tendency)
from .snapshots import read_snapshot, snapshot_bytes, write_snapshot
from .spectral import (SpectralField, SpectralGrid, VectorField, dealias,
                       divergence, curl, frac_laplacian, gevrey_filter,
                       gradient, inner_l2, leray_project, make_grid,
                       multiply_dealiased, norm, norm_gevrey, norm_hm,
                       norm_l2, norm_l4, norm_linf, solve_poisson,
                       to_physical, to_spectral)
from .stepping import (StepperConfig, Trajectory, adaptive_dt,
                       euler_reference_step, run, step)
from .timeseries import (append_invariants, append_radius, invariant_columns,
                         read_table)

__version__ = "0.1.0"
