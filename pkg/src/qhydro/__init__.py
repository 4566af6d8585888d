"""1D quantum hydrodynamics: Schrödinger evolution, Madelung fields, force moments and candidate stochastic laws."""

__version__ = "0.1.0"

from .core import Grid, PhysicsConfig, Potential, RealField, WaveFunction, evaluate_potential, make_grid
from .gaussian import GaussianParams
from .madelung import MadelungFields, madelung_fields
from .schrodinger import EvolutionResult, evolve, init_gaussian, step_split_fourier

__all__ = [
    "EvolutionResult",
    "GaussianParams",
    "Grid",
    "MadelungFields",
    "PhysicsConfig",
    "Potential",
    "RealField",
    "WaveFunction",
    "evaluate_potential",
    "evolve",
    "init_gaussian",
    "madelung_fields",
    "make_grid",
    "step_split_fourier",
]
