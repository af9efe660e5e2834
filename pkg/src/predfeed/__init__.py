"""Predictor feedback for control-affine plants with distributed input delays.

The package turns a plant driven by current, lagged, and integrally
distributed input into an input-delay-free form through a zero-future-input
prediction of the state, stabilizes the transformed system, and certifies
the original closed loop with explicit Lyapunov-Krasovskii constants.  A
fixed-step simulator, a closed-form linear oracle, and four worked scenarios
round out the toolbox.
"""

from .errors import NonFiniteError
from .feedback import (LKCertificate, LyapunovSpec, certificate,
                       kappa_gradient, kappa_scalar, lk_functional,
                       m_kappa_bound)
from .linref import (LinearDelaySystem, exp_integrals, linear_Q,
                     linear_lk_functional, linear_predict,
                     linear_transformed_input, load_linear_system,
                     matrix_exponential)
from .predictor import (PredictorCertificate, PredictorResult, check_bounds,
                        predict, rho)
from .reduction import ReductionResult, compute_B, tilde_A, transformed_rhs
from .scenarios import (Scenario, get_scenario, list_scenarios,
                        pendulum_alpha, pendulum_b_samples,
                        pendulum_negativity, pendulum_sector)
from .simulate import (DecayReport, GradientController, LinearGainController,
                       ScalarPredictorController, SimConfig, SimTrace,
                       ZeroController, control_step, decay_check, simulate,
                       snap_step, summary_line, write_trace_csv)
from .systems import (DelaySystem, InputHistory, StateHistoryPair,
                      distributed_term, l2_norm, plant_rhs)

__version__ = "0.1.0"

__all__ = [
    "NonFiniteError",
    "LKCertificate", "LyapunovSpec", "certificate", "kappa_gradient",
    "kappa_scalar", "lk_functional", "m_kappa_bound",
    "LinearDelaySystem", "exp_integrals", "linear_Q", "linear_lk_functional",
    "linear_predict", "linear_transformed_input", "load_linear_system",
    "matrix_exponential",
    "PredictorCertificate", "PredictorResult", "check_bounds", "predict", "rho",
    "ReductionResult", "compute_B", "tilde_A", "transformed_rhs",
    "Scenario", "get_scenario", "list_scenarios", "pendulum_alpha",
    "pendulum_b_samples", "pendulum_negativity", "pendulum_sector",
    "DecayReport", "GradientController", "LinearGainController",
    "ScalarPredictorController", "SimConfig", "SimTrace", "ZeroController",
    "control_step", "decay_check", "simulate", "snap_step", "summary_line",
    "write_trace_csv",
    "DelaySystem", "InputHistory", "StateHistoryPair", "distributed_term",
    "l2_norm", "plant_rhs",
]
