"""Sweeps over (p, k), regime classification, persistence and reports."""
