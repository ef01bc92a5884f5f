"""Prometheus metrics for sweeps and the PDE solver."""

from prometheus_client import Counter, Gauge, Histogram

# Sweep metrics
cells_processed_total = Counter(
    'drift_lab_cells_processed_total',
    'Total number of phase cells processed',
    ['case', 'classification'],
)

cell_duration_seconds = Histogram(
    'drift_lab_cell_duration_seconds',
    'Wall time per phase cell in seconds',
    ['case'],
    buckets=[0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 120.0, 300.0, 600.0],
)

sweep_cells_in_flight = Gauge('drift_lab_sweep_cells_in_flight', 'Cells currently dispatched to the worker pool')

# Solver metrics
solver_steps_total = Counter(
    'drift_lab_solver_steps_total',
    'Total number of IMEX steps taken',
    ['classification'],
)

solver_fallback_steps_total = Counter(
    'drift_lab_solver_fallback_steps_total',
    'Steps repeated with backward Euler after a Crank-Nicolson undershoot',
)
