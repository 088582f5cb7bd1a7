"""Experiment configuration, rate fitting and the command line interface."""

from .config import ConfigError, ExperimentConfig, load_config, parse_n_grid
from .rates import RateFit, fit_rate, lemma_truncmoment_check

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_n_grid", "RateFit", "fit_rate",
           "lemma_truncmoment_check"]
