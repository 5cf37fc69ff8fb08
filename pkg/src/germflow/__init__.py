"""Jets of holomorphic map germs and vector fields at a fixed point."""

from .errors import *  # noqa: F401,F403
from .flow_map import FlowOptions, FlowResult, VectorFieldJet, flow_jet, matrix_exponential, semigroup_check
from .jet_core import (
    DEFAULT_TOLERANCES,
    Jet,
    MapJet,
    ToleranceProfile,
    jacobian_apply,
    jet_eval,
    jet_mul,
    map_compose,
    map_inverse,
    map_iterate,
)
from .normal_form import SpectrumInfo, NormalFormResult, assert_resonant_only, normalize, resonant, spectrum_of
from .theorems import (
    check_isolated_fixed_point_criterion,
    compare_flow_closed_form,
    verify_fractional_iterate,
    verify_isochronous_center,
    verify_iteration_formula,
)

__version__ = "0.1.0"
