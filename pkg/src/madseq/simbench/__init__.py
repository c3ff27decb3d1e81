"""Simulation scenarios, GLM baselines, metrics, and the benchmark harness."""
from .bench import BenchConfig, MetricsReport, run_benchmark
from .glm import GlmFit, glm_fit_irls, glm_mean_interval, glm_predict_mean
from .metrics import auc, mse
from .scenarios import ScenarioData, ScenarioSpec, generate_scenario

__all__ = [
    "BenchConfig",
    "GlmFit",
    "MetricsReport",
    "ScenarioData",
    "ScenarioSpec",
    "auc",
    "generate_scenario",
    "glm_fit_irls",
    "glm_mean_interval",
    "glm_predict_mean",
    "mse",
    "run_benchmark",
]
