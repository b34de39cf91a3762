"""Estimation and pile-up analysis for the MA(1) model with a unit root under a Laplace likelihood."""

from .asymptotics import (
    AsymptoticConfig,
    BrownianPair,
    limit_beta_distributions,
    limit_u,
    limit_u_star,
    minimize_limit_u,
    pileup_prob_laplace_rb,
    pileup_prob_mc,
    simulate_brownian_pair,
    y_laplace_rep,
    y_statistic,
)
from .estimators import (
    FitResult,
    Method,
    Mode,
    SearchConfig,
    WindowMissError,
    exact_loglik,
    fit_exact,
    fit_joint,
    fit_lad,
    inner_zinit,
    pileup_test_joint,
)
from .experiments import ExperimentSpec, Table, TableRow, run_lad_compare, run_table1, run_table2, run_table3
from .noise import Ma1Config, Ma1Sample, NoiseFamily, NoiseSpec, derive_constants, sample_noise, simulate_ma1
from .residuals import (
    AffineResiduals,
    ObjectiveValue,
    affine_decomposition,
    objective,
    residuals_backward,
    residuals_forward,
    u_n,
)

