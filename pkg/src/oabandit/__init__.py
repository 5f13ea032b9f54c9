"""Observation-augmented contextual bandits: robust fusion of possibly
faulty external semantic observations and active-inference option selection
over Gaussian-mixture parameter beliefs."""

from .model import (
    ContextBundle,
    EnvironmentTruth,
    ParameterMatrix,
    generate_environment,
    sample_outcome,
    softmax_distribution,
    softmax_likelihood,
)
from .gaussmix import (
    GaussianComponent,
    NaturalParams,
    ParameterBelief,
    from_natural,
    mixture_log_pdf,
    mixture_mean,
    moment_match,
    normalized_belief,
    runnalls_reduce,
    to_natural,
)
from .laplace import LaplaceResult, batch_laplace, laplace_update
from .fusion import (
    AssociationPosterior,
    FusionConfig,
    UpdateOutcome,
    association_probabilities,
    naive_update,
    psda_update,
)
from .efe import (
    EfeScore,
    EvolutionaryPrior,
    LikelihoodExpForm,
    efe,
    expected_quadratic,
    likelihood_exp_form,
    predictive_prob,
)
from .policies import (
    AifPolicy,
    EpsilonGreedyPolicy,
    OraclePolicy,
    Policy,
    PolicyState,
    ThompsonPolicy,
    UcbPolicy,
    make_policy,
)
from .episode import (
    CommSchedule,
    EpisodeTrajectory,
    SemanticObservation,
    cumulative_regret,
    human_observe,
    init_belief,
    run_episode,
)
from .experiments import (
    Cell,
    ExperimentConfig,
    ResultTable,
    emit_csv,
    load_table,
    paired_less,
    preset_config,
    run_mc,
    summarize,
)

__version__ = "0.1.0"
