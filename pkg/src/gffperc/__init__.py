"""Level-set percolation of the lattice Gaussian free field.

Exact finite-range field sampling built on lazy random-walk kernels,
cluster analysis of thresholded configurations, deterministic multi-scale
bridge constructions, Monte-Carlo estimators for the critical levels, and
an exploration-algorithm test bench for variance/influence inequalities.
"""

__version__ = "0.1.0"
