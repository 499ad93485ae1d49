"""Solvers for a continuous-time information provision game.

The principal controls the flow of public information about a binary
state; a myopic agent acts on the induced belief. This package computes
the induced payoff, its concave envelope, the principal's value function
(closed form and finite differences), the equilibrium funding policy and
long-run beliefs, and simulates the belief martingale.
"""

__version__ = "0.1.0"

from ._accel import BACKENDS, default_backend
from .envelope import BeliefPair, concave_envelope, persuasion_beliefs
from .equilibrium import (
    EquilibriumReport,
    FullInfoReport,
    NotApplicable,
    NotSingleCrossing,
    Policy,
    SweepTable,
    best_reply_policy,
    compute_equilibrium,
    full_info_check,
    long_run_beliefs,
    solve_value,
    sweep,
    welfare_prior_monotonicity,
)
from .fixtures import FIXTURES, load_fixture
from .hjb_closed import (
    ClosedFormValue,
    NoValidConfiguration,
    NotAffine,
    VerificationReport,
    basis,
    solve_closed_form,
    verify_value,
    xi,
)
from .hjb_fd import GridValue, NonConvergence, funding_region_fd, solve_fd
from .io import load_model, dump_model
from .model import (
    AgentStrategy,
    ModelSpec,
    ModelValidationError,
    induced_flow_payoff,
    myopic_regular_strategy,
    phi_inverse,
    phi_map,
)
from .piecewise import PiecewiseFn
from .polynomial import Polynomial
from .simulate import SimConfig, SimResult, absorption_stats, simulate_paths
