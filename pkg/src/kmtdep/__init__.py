"""Simulation toolkit for strong Gaussian approximation of stationary causal processes.

Submodules: ``innovations`` (counter-based random streams and innovation laws),
``processes`` (causal process families), ``depmeasure`` (dependence measures and
condition checks), ``pipeline`` (truncation, m-dependent approximation and
triadic blocking), ``gaussian_coupling`` (variance clock and block coupling) and
``harness`` (configs, experiments and the ``kmtdep`` command line).
"""

__version__ = "0.1.0"
