"""Detection-efficiency attacks on QKD and randomness protocols, and bound-randomness certificates."""
from .boundrand import TripartiteBox, build_box, certify_bound_randomness, guess_success, verify_no_signalling
from .channel import ChannelModel, channel_efficiency, max_distance, min_bases
from .errors import (
    ConfigurationError,
    DetAttackError,
    InfeasibleError,
    NumericalFailure,
    UndefinedConditionalError,
)
from .improved import (
    ImprovedPlan,
    build_improved_plan,
    critical_eta_improved,
    guessing_probability_improved,
    induced_joint,
    simulate_improved,
    tune_parameters,
)
from .lossy import EfficiencyProfile, LossyBehavior, apply_loss_both, apply_loss_bob
from .polytope import LocalityCertificate, bell_value, critical_local_eta, is_local
from .primary import (
    AttackPlan,
    TargetSet,
    build_plan,
    critical_efficiency,
    feasible,
    guessing_probability,
    induced_behavior,
    simulate_rounds,
)
from .scenario import (
    Behavior,
    QuantumModel,
    Scenario,
    born_behavior,
    chsh_tsirelson,
    conditional_bob,
    magic_square,
)
