"""drift-lab: numerical laboratory for drift-diffusion equations with power-law nonlinearity."""

__version__ = "0.1.0"
