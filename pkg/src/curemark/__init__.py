"""Bayesian cure-rate survival modeling with latent risk groups.

A numpy/scipy library for survival data with a cured fraction: the latent
cure-rate marker mixture model plus four comparators (Cox, promotion-time,
double proportional-hazards and latent-activation cure models) on a shared
piecewise-exponential baseline, with data-augmented Gibbs samplers, a
reversible-jump sampler over the number of risk groups, CPO/LPML and DIC
model comparison, and posterior predictive risk classification.
"""

from .archive import SampleArchive, merge_archives
from .data import (CensoringSpec, CovariateSpec, DataSchema, SimulationTruth,
                   StandardizationRecord, build_partition, evaluate_km, km_estimate,
                   load_dataset, save_dataset, simulate_lcrm, standardize)
from .exceptions import (ConfigurationError, CuremarkError, DataParseError,
                         ModelKindError, NumericError, ProprietyError)
from .gibbs import (CisSampler, CoxSampler, LacrSampler, LcrmSampler, McmcConfig,
                    PhphSampler, run_chain, sample_truncated_gamma)
from .hazard import (BaselineHazard, IntervalDecomposition, TimePartition, baseline_cdf,
                     cumulative_hazard, exposure_matrix, interval_decompose,
                     interval_indices, invert_cumulative_hazard, log_baseline_survival)
from .models import (CisParams, CoxParams, Dataset, LacrParams, LatentState, LcrmParams,
                     ModelParams, PhphParams, complete_loglik, conditional_survival,
                     cure_rate, lcrm_responsibilities, marginal_survival,
                     membership_probs, observed_loglik, observed_loglik_grad,
                     subject_logliks, survival_at)
from .predict import (PredictiveReport, classify, overall_cure_rate_pred,
                      per_draw_probs_at, predictive_probs_at, predictive_probs_t0,
                      predictive_report, survival_curves)
from .priors import (PriorSpec, ProprietyReport, check_propriety, elicit_theta_prior,
                     log_prior, ordered_gamma_log_norm)
from .rjmcmc import (RjConfig, default_prior_ladder, default_transition_matrix,
                     model_probabilities, run_rj_chain)
from .summaries import (ComparisonReport, ParameterSummary, comparison_report,
                        compute_cpo_lpml, compute_dic, effective_sample_size,
                        hpd_interval, summarize, summary_report)

__version__ = "0.1.0"
