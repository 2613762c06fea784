from .bellman import QFactorRow, IterationResult, DimensionMismatch
from .bellman import apply_tmu, apply_t, q_factor, q_factor_row, q_values, policy_matrix
from .bellman import evaluate_policy_exact, evaluate_policy_iterative, value_iteration, greedy_policy
from .bellman import bellman_gap, check_global_optimality, check_local_optimality, check_invariant_set, reachable_states, is_irreducible
from .classical import TERMINATION, PiTrace, improve_policy, run_classical_pi
from .online import ONLINE_MODE, IMPROVEMENT_RULE, OnlineConfig, StepRecord, OnlineRunLog, InvalidConfig, InvalidStart
from .online import Finding, VerificationReport, improvement_step, run_online_pi, verify_run
