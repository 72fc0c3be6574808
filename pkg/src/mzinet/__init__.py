"""
Design of broadband photonic devices built from meshes of Mach-Zehnder
interferometers whose phase shifters are width-modulated waveguide tapers.
"""

__version__ = "0.1.0"

from .errors import NonFiniteGradientError, OutOfRangeError, SpecError
from .waveguide import (
    CouplerModel,
    EffectiveIndexModel,
    TaperProfile,
    build_coupler_table,
    coupler_response,
    effective_index,
    interpolate_coupler,
    taper_phase,
)
from .mesh import (
    DeviceState,
    build_topology,
    mzi_transfer,
    network_scatter,
    read_geometry,
    simulate_spectrum,
    trainable_parameter_count,
    write_geometry,
)
from .objective import DesignObjective, regularization_penalty
from .gradient import evaluate_objective, finite_difference_check, gradient
from .optimize import (
    InitConfig,
    OptimizationTrace,
    adam_step,
    convergence_check,
    initialize_parameters,
    learning_rate,
    optimize_device,
    run_optimization,
)
from .tolerance import ToleranceReport, apply_etch_offset, etch_sweep, layer_study
from .designspec import DesignSpec, build_targets, parse_design_spec
