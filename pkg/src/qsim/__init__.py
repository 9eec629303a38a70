"""Branching process with mutation: survival criteria, phase diagram and exact simulation."""

__version__ = "0.1.0"

from .distributions import Mixture, PointMass, RateDistribution, Tabulated, Uniform, expect, mass_above, sample_rate
from .sim import ModelParams, SimCaps, simulate, simulate_batch
from .theory import Phase, classify_phase, evaluate_conditions, m_uniform_closed_form, solve_r_c

__all__ = [
    "Mixture", "PointMass", "RateDistribution", "Tabulated", "Uniform",
    "expect", "mass_above", "sample_rate",
    "ModelParams", "SimCaps", "simulate", "simulate_batch",
    "Phase", "classify_phase", "evaluate_conditions", "m_uniform_closed_form", "solve_r_c",
]
