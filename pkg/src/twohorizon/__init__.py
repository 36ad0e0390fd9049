"""Policy evaluation and learning that balances short-term and long-term
rewards under confounded treatment assignment and missing-not-at-random
long-term outcomes."""

from ._kernels import BACKEND
from .crossfit import (NuisanceEstimates, corrupt_nuisance, fit_nuisances,
                       oracle_nuisances)
from .dataset import (CsvSchema, ObservationalDataset, PotentialTruth,
                      UnitRecord, load_csv, save_csv, split_folds, validate)
from .errors import DataError, NumericalError, TwoHorizonError
from .estimators import (PolicyEvalInput, RewardEstimate, efficiency_gap,
                         estimate_balanced, estimate_reward, phi_s, phi_y)
from .learners import FittedModel, LearnerSpec, fit, predict
from .policy import (OptSettings, Policy, PolicyMetrics, dm_policy,
                     evaluate_policy, learn_policy, optimal_plugin_policy)
from .simgen import (DgpATable, DgpSpec, TruthSummary, apply_missingness,
                     enumerate_truth, generate, generate_uncorrelated)

__version__ = "0.1.0"
