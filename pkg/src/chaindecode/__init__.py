"""Secondary spectrum access with chain decoding over a primary ARQ process.

Submodules:

``channel``  decoding regions and their probabilities at the secondary receiver
``mdp``      exact evaluation of stationary access policies
``policy``   closed-form optimal policies and access efficiencies
``learner``  online adaptation of the access level and SU rate
``sim``      slot-level Monte Carlo of the protocol and baseline schemes
``cli``      geometry, configuration and the figure suites
"""
from .channel import DecodingProfile, LinkStats, Outcome, capacity, classify_outcome, compute_profile
from .mdp import AccessPolicy, CdState, evaluate_policy, pareto_oracle, stationary_distribution, transition
from .policy import closed_form_performance, constants, genie_aided, optimal_policy

__version__ = "0.1.0"

__all__ = [
    "DecodingProfile", "LinkStats", "Outcome", "capacity", "classify_outcome", "compute_profile",
    "AccessPolicy", "CdState", "evaluate_policy", "pareto_oracle", "stationary_distribution",
    "transition", "closed_form_performance", "constants", "genie_aided", "optimal_policy",
]
