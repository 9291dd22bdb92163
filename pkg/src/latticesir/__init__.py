"""Moments, Green functions and event simulation for SIR epidemics on a
periodic lattice with nonlocal mobility."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .first_moments import (
    MomentField,
    Rates,
    RegimeReport,
    classify_first_moment,
    classify_homogeneous_first_moment,
    m1_homogeneous,
    m1_inhomogeneous,
    m1_ode_oracle,
    reproduction_numbers,
)
from .intermittency import (
    IntermittencyReport,
    classify_intermittency,
    ratio_pair,
    ratio_same_site,
)
from .kernel import (
    FourierSymbol,
    LatticeSpec,
    MobilityKernel,
    build_kernel,
    effective_diffusion,
    kernel_gaussian,
    kernel_nearest_neighbor,
    kernel_variance,
    symbol,
    symbol_grid,
)
from .second_moments import (
    PairMoment,
    SecondMomentRegime,
    classify_homogeneous_second_moment,
    classify_second_moment,
    m2_homogeneous_pair,
    m2_homogeneous_same_site,
    m2_inhomogeneous,
    m2_ode_oracle,
)
from .simulator import McEstimate, SimState, figure1_experiment, init_state, mc_moments, run, step
from .torus import GreenResult, TransitionField, green_function, p00, p00_decay_fit, transition_probability
