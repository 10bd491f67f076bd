"""Finite element simulation and optimal boundary control of Q-tensor liquid crystal flows."""
from . import qtensor
from .config import ProblemConfig, preset_config
from .control import ControlProblem, ControlSet, OptimizerOptions, Targets, optimize
from .defects import DefectReport, locate_defects
from .experiments import run_experiment
from .errors import ConfigError, LdgError, LinearSolveError, NewtonError, PreconditionError
from .fem import ModelParams, assemble, interpolate
from .forward import SolverOptions, solve_forward
from .adjoint import solve_adjoint
from .mesh import build_unit_mesh

__version__ = "0.1.0"
