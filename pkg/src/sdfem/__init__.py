"""Streamline-diffusion P1 finite elements on Shishkin triangular meshes.

Implements the stabilized discretization of the convection-diffusion model
problem with an exponential outflow layer and two characteristic layers,
the discrete Green's function via transposed solves, and the weighted
energy-norm machinery used to localize and bound it.
"""

from .assembly import (FEFunction, SparseSystem, StabilizationConfig,
                       assemble_system, bilinear_apply, stabilization_delta)
from .harness import (CoercivityReport, ScalingRow, StudyConfig,
                      coercivity_check, emit_plot, green_scaling_study,
                      lemma_k_sweep, place_star)
from .mesh import (Region, ShishkinMesh, TransitionParams, Triangle,
                   build_mesh, classify_point, transition_params)
from .norms import (InterpolationReport, energy_norm, energy_norm_error,
                    interpolation_error_report, nodal_interpolant)
from .problem import (PRESETS, ProblemSpec, SmoothField, constant_field,
                      make_problem, manufactured_rhs, sine_product_field)
from .quadrature import TriangleRule, composite_rule, quadrature_integrate, triangle_rule
from .solver import SolveReport, SystemSolver, green_function, solve_system
from .weight import (LemmaQuantities, QuadratureConvergenceError,
                     WeightPropertyError, WeightPropertyReport, WeightSpec,
                     lemma_quantities, make_weight_spec, sigma_params,
                     weight_eval, weight_inv_eval, weight_property_report,
                     weighted_energy_norm)

__version__ = "0.1.0"
