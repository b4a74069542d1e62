"""
cade — Counterfactual adversarial examples over structural causal models.

Intervene on a few causal variables, let the SCM carry the consequences
to their descendants, and see which victims still predict the target.
"""

__version__ = "0.1.0"

from .graph import CausalGraph, validate_graph, markov_blanket
from .scm import InterventionMask, Noise, Scm, SimulatorScm, StructuralModel
from .datasets import Dataset, ToyParams, gen_linear_toy, gen_pendulum_latent, gen_syn_measurement
from .attacks import AttackConfig, cade_random, cade_whitebox, fgsm, perturb_baseline, pgd, run_attack
from .evaluation import AttackReport, evaluate
from .config import ExperimentConfig, load_config
from .harness import budget_sweep, run

__all__ = [
    "CausalGraph",
    "validate_graph",
    "markov_blanket",
    "InterventionMask",
    "Noise",
    "Scm",
    "SimulatorScm",
    "StructuralModel",
    "Dataset",
    "ToyParams",
    "gen_linear_toy",
    "gen_pendulum_latent",
    "gen_syn_measurement",
    "AttackConfig",
    "cade_random",
    "cade_whitebox",
    "fgsm",
    "perturb_baseline",
    "pgd",
    "run_attack",
    "AttackReport",
    "evaluate",
    "ExperimentConfig",
    "load_config",
    "budget_sweep",
    "run",
]
