"""Numerical laboratory for self-similar blow-up and extension profiles of
u_t = -u_xxxx + |u|^{p-1}u."""

from .odecore import ModelParams, PhaseState, Variant

__all__ = ["ModelParams", "PhaseState", "Variant"]
__version__ = "0.1.0"
