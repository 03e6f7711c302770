"""Byzantine-resilient federated online Gaussian process regression."""
from .aggregation import (TrimPolicy, TrimReport, baseline_aggregate, build_kept_set,
                          poe_aggregate, resilient_poe, trim)
from .attacks import AttackKind, AttackSpec, RoundContext, apply_attack
from .bounds import BoundReport, delta_of, theta_of, variance_bounds, verify_round
from .fusion import BoundParams, fuse, gamma, in_fused_set, theta_check, theta_hat
from .kernel import Hyperparams, SquaredExponential, kappa, kernel_eval
from .local_gpr import (AgentState, Prediction, Provenance, TrainingPoint, dispersion,
                        full_gpr_predict, ingest, local_predict, nearest)

__version__ = "0.1.0"
