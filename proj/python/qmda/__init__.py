"""Operator-theoretic sequential data assimilation.

Density-matrix filtering for partially observed, measure-preserving
dynamical systems: Koopman shift operators evolve the state between
measurements and spectral projectors of the quantized observable collapse
it at measurements. Ships an exact analytic backend for the circle rotation
and a fully data-driven backend (kernel eigenbasis learned from
trajectories, e.g. Lorenz 63).
"""

from ._qmda import (
    AnalyticCircleBasis,
    CircleParams,
    EigenBasis,
    ExperimentConfig,
    KernelBasisParams,
    L63Params,
    NumericalError,
    OperatorBundle,
    ParameterError,
    QuantilePartition,
    TrajectoryDataset,
    __version__,
    affiliation,
    apply_scale,
    assimilate,
    build_basis,
    build_partition,
    circle_binary_projectors,
    circle_cos_projectors,
    circle_trajectory,
    config_to_json,
    convergence_study,
    delay_embed,
    empirical_cdf,
    ignorance_bits,
    integrate_l63_rk4,
    l63_velocity,
    load_bundle,
    precision_bits,
    preset_config,
    preset_names,
    projector_matrices,
    run_preset,
    save_bundle,
    shift_matrix,
    spinup_sample,
    train,
)

__all__ = [
    "AnalyticCircleBasis",
    "CircleParams",
    "EigenBasis",
    "ExperimentConfig",
    "KernelBasisParams",
    "L63Params",
    "NumericalError",
    "OperatorBundle",
    "ParameterError",
    "QuantilePartition",
    "TrajectoryDataset",
    "__version__",
    "affiliation",
    "apply_scale",
    "assimilate",
    "build_basis",
    "build_partition",
    "circle_binary_projectors",
    "circle_cos_projectors",
    "circle_trajectory",
    "config_to_json",
    "convergence_study",
    "delay_embed",
    "empirical_cdf",
    "ignorance_bits",
    "integrate_l63_rk4",
    "l63_velocity",
    "load_bundle",
    "precision_bits",
    "preset_config",
    "preset_names",
    "projector_matrices",
    "run_preset",
    "save_bundle",
    "shift_matrix",
    "spinup_sample",
    "train",
]
