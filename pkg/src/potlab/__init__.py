"""Potentials, capacities and solvability tests for semilinear problems with boundary measure data.

Modules
-------
model       domains, boundary measures, grids and fields
kernels     exact Green/Poisson kernels, the kernel model ``N_{alpha,beta}``, Hardy exponents
potentials  quadrature engine for Green, Poisson, kernel-model and Riesz potentials
capacity    Riesz and weighted capacities by primal and dual convex programs
criteria    solvability criteria and structural checks, reported as ``CriterionReport``
solver      monotone Picard iteration and the gradient-case fixed point
cli         the ``potlab`` command line
"""

from .capacity import BoundarySet, CapacityConfig, CapacityEstimate, measure_vs_capacity, riesz_capacity, \
    riesz_capacity_dual, riesz_capacity_primal, weighted_capacity_dual
from .criteria import CRITERIA, CriterionReport, ball_growth_test, capacity_compare_test, critical_exponent_pure, \
    criticality_slope, doubling_verify, fefferman_phong_test, measure_battery, pointwise_test, \
    pointwise_test_hardy, quasi_metric_verify, run_criterion, solvability_test, subcritical_mixed
from .errors import DivergenceError, DomainError, InvariantViolation, NonConvergence, PotlabError, \
    SingularPointError, ToleranceFailure
from .kernels import HardyParams, KernelSpec, green_exact, hardy_exponents, n_kernel, poisson_exact, \
    quasi_distance
from .model import Atom, BoundaryMeasure, Domain, Field, RadialPowerDensity, TabulatedDensity, \
    UniformBallDensity, measure_ball
from .potentials import QuadratureConfig, green_potential, n_measure_potential, n_potential, \
    poisson_potential, riesz_potential
from .solver import SolveConfig, SolveResult, fixedpoint_gradient, picard_kernel_model, picard_pure, residual

__version__ = "0.1.0"
