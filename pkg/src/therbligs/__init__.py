"""Therblig toolkit: contact-state rule engine, differentiable rule losses,
evaluation metrics, synthetic data generation, and a two-stage annotation
service."""

from .core import (
    DEFAULT_MAX_STEPS,
    ContactSet,
    HandContact,
    NULL_TUPLE,
    ObjectVocabulary,
    RuleViolation,
    SequenceError,
    TherbligSequence,
    TherbligTuple,
    ValidationReport,
    Verb,
    VERB_ORDER,
    apply_tuple,
    candidate_tuples,
    candidate_tuples_with_goal,
    check_sequence,
    format_contacts,
    format_sequence,
    format_tuple,
    hand_to_set,
    pad_sequence,
    parse_contacts,
    parse_sequence,
    parse_tuple,
    set_to_hand,
    step_violations,
    strip_padding,
    validate_sequence,
)
from .losses import (
    BETA,
    DELTA,
    GAMMA,
    LossInstance,
    LossReport,
    NonDifferentiableError,
    combined_rule_loss,
    contact_vector,
    derive_states,
    finite_diff_check,
    grad_rule_loss,
    gumbel_softmax,
    loss_C,
    loss_EC,
    loss_NC,
    one_hot_step,
    standard_gumbel,
)

__version__ = "0.1.0"
