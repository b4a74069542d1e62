"""
cade document formats and default hyperparameters.

Every persisted artifact (SCM, model checkpoint, dataset sidecar,
experiment config) is a JSON document carrying a `version` field.
This module holds those versions, the documented schemas, and the
defaults the experiments start from.
"""

import math

SCM_VERSION = "1.0"
CHECKPOINT_VERSION = "1.0"
DATASET_VERSION = "1.0"
CONFIG_VERSION = "1.0"
REPORT_VERSION = "1.0"

# SCM document schema
SCM_SCHEMA = {
    "version": str,
    "kind": str,                 # "additive" (only additive SCMs are serializable)
    "d": int,
    "names": list,               # variable names, length d
    "adjacency": list,           # row-major dense d*d, entry i*d+j is the weight of edge i->j
    "transforms": list,          # per variable: {"breakpoints": [...], "slopes": [...], "offset": float}
    "noise": list,               # per variable: {"kind": "gaussian", "mean", "std"} | {"kind": "uniform", "lo", "hi"}
    "y_index": int,
}

# Model checkpoint schema
CHECKPOINT_SCHEMA = {
    "version": str,
    "kind": str,                 # "linear" | "mlp"
    "task": str,                 # "regression" | "classification"
    "layer_sizes": list,         # [input, hidden..., output]
    "activation": str,           # "relu" | "tanh"
    "input_mean": list,
    "input_scale": list,
    "params": list,              # flattened parameters, layer by layer (W then b)
}

# Pendulum simulator constants
PENDULUM_CENTER_X = 10.0
PENDULUM_CENTER_Y = 10.5
PENDULUM_LENGTH = 9.5
PENDULUM_GROUND = -0.5
PENDULUM_ANGLE_RANGE = (0.0, math.pi / 4)
LIGHT_ANGLE_RANGE = (math.pi / 4, math.pi / 2)
PENDULUM_CLASSES = 50
PENDULUM_NOISE_FRACTION = 0.15
PENDULUM_NOISE_MAGNITUDE = 0.1

# Dataset sizes
DEFAULT_TRAIN_SIZE = 20_000
DEFAULT_TEST_SIZE = 2_000

# Victim architectures
MLP_HIDDEN = (32,)

DEFAULT_TRAIN = {
    "epochs": 30,
    "batch_size": 64,
    "learning_rate": 0.01,
    "optimizer": "sgd",
    "validation_fraction": 0.1,
    "schedule": "constant",
}

# Defense variants: PGD adversarial training on measurement features
DEFAULT_DEFENSE = {
    "epsilon": 0.03,
    "steps": 10,
    "step_size": 0.01,
}

# Attack defaults
DEFAULT_CADE = {
    "steps": 20,
    "step_size": 0.4,
    "epsilon": 0.3,
}

DEFAULT_PGD = {
    "epsilon": 0.03,
    "steps": 10,
    "step_size": 0.01,
}

ATTACK_MODES = ("whitebox", "random", "perturbation", "fgsm", "pgd")
SUBSTITUTE_NONE = "None"

# Budget grids
MEASUREMENT_EPSILONS = (0.01, 0.05, 0.1, 0.2, 0.3)
SIMULATOR_EPSILONS = (0.1, 0.3, 0.5)

# Exact enumeration
MAX_CONFIGURATIONS = 1_000_000
PROPOSITION_TOLERANCE = 1e-10
GENERIC_TOLERANCE = 1e-6
