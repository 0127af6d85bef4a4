"""Non-local Dirichlet forms on finite metric measure spaces.

Tools to instantiate jump-type Dirichlet forms on finite spaces (torus
lattices, pre-gaskets, custom metric files), compute heat kernels, exit
times, harmonic and caloric functions, and empirically test the scaling
conditions that govern parabolic Harnack inequalities, together with the
equivalences that tie those conditions together.
"""

__version__ = "0.1.0"

from .errors import (
    CapExceededError,
    DegenerateBallError,
    DisconnectedKernelError,
    HarnackLabError,
    InsufficientScalesError,
    InvalidSpecError,
    NonconvergentError,
    NonMetricInputError,
)
from .space import DoublingReport, MetricMeasureSpace, build_space, check_doubling
from .scale import PolyconReport, ScaleFunction, build_scale, check_polycon
from .kernel import (JumpKernel, check_j_bounds, check_tail_integral,
                     check_ujs, make_kernel)
from .form import (FormReport, Generator, carre_du_champ, check_csj, check_fk,
                   check_pi, energy, lambda1, make_generator)
from .heat import (HeatTensor, check_conservative, check_ephi, check_hk,
                   check_ndl, default_time_grid, exit_time_green, heat_column,
                   heat_columns, heat_kernel, hk_profile, load_tensor,
                   save_tensor)
from .montecarlo import (ENGINE, PathSample, estimate, jump_counts,
                         simulate_path, verify_levy_system)
from .harnack import (CaloricField, Cylinder, EquivalenceMatrix, check_ehi,
                      check_phi, equivalence_suite, fit_holder,
                      solve_caloric, solve_harmonic)
from .reporting import (ConditionReport, ExperimentConfig, SuiteReport,
                        canonical_json, emit, run, run_simulation)

__all__ = [
    "HarnackLabError", "InvalidSpecError", "NonMetricInputError",
    "DisconnectedKernelError", "DegenerateBallError",
    "InsufficientScalesError", "CapExceededError", "NonconvergentError",
    "MetricMeasureSpace", "build_space", "check_doubling", "DoublingReport",
    "ScaleFunction", "build_scale", "check_polycon", "PolyconReport",
    "JumpKernel", "make_kernel", "check_j_bounds", "check_ujs",
    "check_tail_integral",
    "Generator", "make_generator", "energy", "carre_du_champ", "lambda1",
    "FormReport", "check_fk", "check_pi", "check_csj",
    "HeatTensor", "heat_kernel", "heat_column", "heat_columns",
    "check_conservative", "check_hk", "check_ndl", "check_ephi",
    "exit_time_green", "hk_profile", "save_tensor", "load_tensor",
    "default_time_grid",
    "ENGINE", "PathSample", "simulate_path", "estimate", "jump_counts",
    "verify_levy_system",
    "Cylinder", "CaloricField", "solve_harmonic", "solve_caloric",
    "check_phi", "check_ehi", "fit_holder", "equivalence_suite",
    "EquivalenceMatrix",
    "ConditionReport", "SuiteReport", "ExperimentConfig", "canonical_json",
    "run", "run_simulation", "emit",
    "__version__",
]
