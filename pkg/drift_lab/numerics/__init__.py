"""Grids, Lorentz norms, heat kernels, drift families, the PDE solver and self-similar diagnostics."""
