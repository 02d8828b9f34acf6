"""Robust mean estimation over star-shaped sets.

The estimator descends a pruned tree of local packings of the constraint
set, choosing at each level the offspring that wins a pairwise tournament of
robust tests. Three noise models are supported: Gaussian, known (or
symmetric) sub-Gaussian and unknown sub-Gaussian noise.
"""
__version__ = "0.1.0"

from .adversary import (
    Dataset,
    apply_adversary,
    corrupt_oracle_shift,
    corrupt_pointmass_mixture,
    corrupt_tv_mixture,
)
from .bounds import (
    RateEnvelope,
    cdf_convexity_bound,
    corruption_lower,
    fano_lower,
    gaussian_tail,
    hoeffding_tail,
    kl_chernoff_tail,
    kl_divergence,
    parametric_ratio,
    rate_envelope,
    subgaussian_lower,
    subgaussian_norm_tail,
)
from .constants import (
    GaussianConstants,
    GroupedConstants,
    UnknownSubGaussianConstants,
    g,
    h,
    select_R,
    solve_gaussian_constants,
    solve_unknown_subgaussian_constants,
)
from .entropy import (
    countable_packing,
    entropy_profile,
    eta_star,
    greedy_packing,
    local_entropy,
    maximal_packing,
    vg_bound,
    vg_sparse_packing,
)
from .geometry import (
    EuclideanBall,
    Hyperrectangle,
    Interval,
    Simplex,
    Singleton,
    SparseCone,
    StarCross,
    StarSet,
    make_set,
    membership,
)
from .harness import RiskReport, RobustConfig, run_trials, sweep
from .hypotests import (
    DominationContext,
    NoiseModel,
    dominates,
    psi_gaussian,
    psi_grouped,
    psi_unknown_subgaussian,
    trimmed_mean,
    v_statistic,
)
from .tournament import (
    EstimatorConfig,
    TraversalState,
    j_star,
    run_estimator,
    select_next,
    tournament_T,
)
from .tree import PackingTree, build_tree, verify_tree
from .unbounded import LocalizationResult, compute_S, hat_R, run_unbounded_estimator
