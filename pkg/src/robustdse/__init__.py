"""Robust dynamic state estimation for multimachine power systems.

Library layout:

- power_model: classical machine dynamics, network reduction,
  measurement functions and Jacobians
- robust_stats: projection statistics, Huber functions, robust scale
- filters: EKF, robust GM-EKF, UKF behind one step interface
- simulator: truth trajectories, noisy PMU streams, fault injection
- fileio: case and scenario text formats
- cli: `robustdse run` / `robustdse bench`
"""

from .errors import ConfigError, NumericalError, RobustDseError
from .filters import (
    FilterState,
    GmekfHistory,
    GmekfStepInfo,
    NoiseModel,
    RegressionForm,
    UkfConfig,
    ekf_correct,
    ekf_predict,
    ekf_step,
    gmekf_build_regression,
    gmekf_irls,
    gmekf_prewhiten,
    gmekf_step,
    gmekf_update_covariance,
    gmekf_weights,
    ukf_step,
)
from .power_model import (
    DynamicState,
    GeneratorParams,
    MeasurementFrame,
    PowerSystemModel,
    RawCase,
    ReducedNetwork,
    SystemParams,
    channel_index,
    channel_labels,
    discretize_step,
    electrical_power,
    equilibrium_state,
    jacobian_F,
    jacobian_H,
    measurement_fn,
    reduce_network,
    swing_derivative,
)
from .robust_stats import (
    HuberConfig,
    InnovationMatrix,
    RobustWeights,
    b_constant,
    efficiency_correction,
    huber_psi,
    huber_rho,
    outlier_weights,
    projection_statistics,
    robust_scale,
)
from .simulator import (
    Disturbance,
    Fault,
    Scenario,
    Trajectory,
    apply_faults,
    overall_error,
    simulate_truth,
    synthesize_measurements,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
