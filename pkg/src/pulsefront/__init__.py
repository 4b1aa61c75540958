"""Pulsating fronts for reaction-diffusion equations with time-periodic nonlinearities."""

__version__ = "0.1.0"
