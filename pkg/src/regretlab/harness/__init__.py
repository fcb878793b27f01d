"""Experiment orchestration: config parsing, runs, comparisons, lemma campaigns, plots."""
from .campaign import CampaignResult, run_lemma_campaign
from .config import ExperimentConfig, OptimizerSpec, StepSize, load_config, parse_config
from .experiment import (
    ExperimentResult,
    build_problem,
    certify_trace,
    compare_optimizers,
    run_experiment,
    steps_to_tolerance,
)
from .plot import emit_svg_plot, render_svg

__all__ = [
    "CampaignResult", "ExperimentConfig", "ExperimentResult", "OptimizerSpec", "StepSize",
    "build_problem", "certify_trace", "compare_optimizers", "emit_svg_plot", "load_config",
    "parse_config", "render_svg", "run_experiment", "run_lemma_campaign", "steps_to_tolerance",
]
