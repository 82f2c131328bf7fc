"""Exact conditional tests for contingency tables ordered by posterior
probabilities of composite alternative events."""

from .engine import (
    DeterministicStatistic,
    FiniteModel,
    PosteriorProbability,
    PosteriorRatio,
    TestReport,
    average_risk,
    bayes_region,
    bayes_region_alpha,
    conditional_bayes_region,
    exact_p_value,
    exact_p_value_enumerated,
    mc_significance,
    mean_power,
    mean_significance,
)
from .hypotheses import CONCORDANCE, POSITIVE_DEPENDENCE, SIMPSON, EventPredicate, epsilon_null
from .nulldist import (
    RxCMargins,
    StratifiedMargins,
    enumerate_stratified_space,
    rxc_count,
    rxc_enumerate,
    rxc_log_pmf,
    rxc_sample,
    stratified_null_pmf,
)
from .posterior import event_probability, sample_dirichlet
from .power import PowerStudyConfig, gaussian_demo, importance_weights, power_study, weighted_resample
from .tables import (
    ContingencyTable,
    ProbabilityVector,
    concordance_probs,
    gamma,
    odds_ratios_222,
    plugin_probs,
    validate_table,
)

__version__ = "0.1.0"
