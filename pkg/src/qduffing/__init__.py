"""Mean-field construction for the quantum Duffing oscillator, with brute-force checks."""

from .meanfield import PhysParams, solve_omega

__all__ = ["PhysParams", "solve_omega"]
__version__ = "0.1.0"
