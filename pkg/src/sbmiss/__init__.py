"""Weighted stochastic block models under randomly missing dyads.

Estimation (closed-form complete-data MLE, variational EM on the
observed dyads), the matching limit theory (covariances, expected
likelihood ratios, symmetry and alignment machinery), and a Monte Carlo
harness that checks the limit claims at desk scale.
"""

from .asymptotics import (
    TheoreticalLimits,
    elr,
    lan_curvature_check,
    profile_elr,
    profile_local_bound,
    sigma_conn,
    sigma_conn_cell,
    sigma_props,
    theoretical_limits,
    ybar,
)
from .families import FAMILIES, get_family
from .harness import ExperimentConfig, ExperimentReport, normality_summary, run_experiment
from .inference import (
    FitConfig,
    FitResult,
    complete_log_likelihood,
    complete_mle,
    e_step,
    elbo,
    exact_observed_loglik,
    m_step,
    map_assignment,
    vem_fit,
)
from .model import (
    Assignment,
    SbmParams,
    align,
    apply_permutation,
    assumption_report,
    class_distinctness,
    confusion_matrix,
    hamming_distance_up_to_perm,
    is_c_regular,
    params_from_means,
    s_star_matrix,
    symmetry_group,
)
from .sampling import Mask, MaskDesign, check_no_isolated_node, rho_hat, sample_mask
from .simulate import (
    GroundTruth,
    ObservedGraph,
    sample_assignment,
    sample_graph,
    simulate_observed,
)

__version__ = "0.1.0"
