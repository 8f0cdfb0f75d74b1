"""Diffusion LMS networks over underwater visible-light links."""

from .channel import (
    DEFAULT_TABLE,
    FadingModel,
    LinkGeometry,
    Normalization,
    VarianceTable,
    WaterProfile,
    fading_pdf,
    link_moments,
    lookup_variance_by_distance,
    lookup_variance_by_water,
    path_loss,
    sample_fading,
    sigma_x_from_scintillation,
)
from .diffusion import (
    DataModel,
    DivergenceError,
    MsdTrace,
    RunConfig,
    Strategy,
    atc_iteration,
    cta_iteration,
    global_cost,
    run_monte_carlo,
    steady_state_msd,
)
from .network import (
    CombinationMatrix,
    Topology,
    generate_topology,
    load_topology,
    sample_link_matrix,
    uniform_weights,
)
from .steady_state import error_recursion_moments, mean_stability, predict_msd

__version__ = "0.1.0"
