"""
cade Config — experiment documents.

An experiment config is a JSON document:

    {
      "version": "1.0",
      "name": "synmeasurement-fig6",
      "dataset":  {"generator": "syn_measurement", "n_train": 20000, "n_test": 2000, "params": {}},
      "victims":  [{"name": "MLP", "kind": "mlp", "hidden": [32]}, {"name": "MLP(D)", "kind": "mlp", "defense": true}],
      "attacks":  [{"label": "C1", "S": ["C1"], "modes": ["whitebox", "perturbation"], "epsilons": [0.1, 0.3]}],
      "seeds":    [0, 1, 2],
      "output":   "runs/synmeasurement-fig6",
      "n_attack": 500,
      "workers":  1
    }

Bundled configs live in cade/configs/ and are loaded by name.
"""

from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .datasets import SCM_BUILDERS
from .errors import ConfigError
from .serialize import read_json, write_json
from .training import SCHEDULES, AdversarialConfig, ModelSpec, TrainConfig
from . import spec

FITS = ("gradient", "erm")
MODE_SUFFIX = {"whitebox": "i", "random": "r", "perturbation": "p", "fgsm": "fgsm", "pgd": "pgd"}


@dataclass(frozen=True)
class DatasetSpec:
    generator: str
    n_train: int = spec.DEFAULT_TRAIN_SIZE
    n_test: int = spec.DEFAULT_TEST_SIZE
    params: Dict[str, Any] = field(default_factory=dict)
    test_params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.generator not in SCM_BUILDERS:
            raise ConfigError(f"Unknown generator '{self.generator}'. Available: {', '.join(SCM_BUILDERS)}")
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("n_train and n_test must be positive")


@dataclass(frozen=True)
class VictimSpec:
    """One victim to train; defense=True trains it adversarially with PGD."""

    name: str
    kind: str = "mlp"
    hidden: Tuple[int, ...] = spec.MLP_HIDDEN
    activation: str = "relu"
    fit: str = "gradient"
    defense: bool = False
    epochs: int = spec.DEFAULT_TRAIN["epochs"]
    batch_size: int = spec.DEFAULT_TRAIN["batch_size"]
    learning_rate: float = spec.DEFAULT_TRAIN["learning_rate"]
    optimizer: str = spec.DEFAULT_TRAIN["optimizer"]
    schedule: str = spec.DEFAULT_TRAIN["schedule"]
    defense_epsilon: float = spec.DEFAULT_DEFENSE["epsilon"]
    defense_steps: int = spec.DEFAULT_DEFENSE["steps"]
    defense_step_size: float = spec.DEFAULT_DEFENSE["step_size"]

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.fit not in FITS:
            raise ConfigError(f"Unknown fit '{self.fit}'. Available: {', '.join(FITS)}")
        if self.fit == "erm" and (self.kind != "linear" or self.defense):
            raise ConfigError(f"victim '{self.name}': closed-form fits need an undefended linear model")
        if self.name == spec.SUBSTITUTE_NONE:
            raise ConfigError(f"'{spec.SUBSTITUTE_NONE}' is reserved for model-free attacks")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"victim '{self.name}': Unknown schedule '{self.schedule}'. Available: {', '.join(SCHEDULES)}")

    def model_spec(self, n_outputs: int = 1) -> ModelSpec:
        return ModelSpec(self.kind, self.hidden, self.activation, n_outputs)

    def train_config(self, task: str, seed: int) -> TrainConfig:
        adversarial = None
        if self.defense:
            adversarial = AdversarialConfig(self.defense_epsilon, self.defense_steps, self.defense_step_size)
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=seed,
            task=task,
            optimizer=self.optimizer,
            schedule=self.schedule,
            adversarial=adversarial,
        )


@dataclass(frozen=True)
class AttackGridSpec:
    """
    One intervened set S crossed with modes, budgets and substitutes.

    substitutes lists victim names the examples are crafted on; model-free
    modes (random, and perturbation without a model) use "None".
    """

    label: str
    S: Tuple[str, ...] = ()
    modes: Tuple[str, ...] = ("whitebox",)
    epsilons: Tuple[float, ...] = (spec.DEFAULT_CADE["epsilon"],)
    substitutes: Tuple[str, ...] = ()
    steps: int = spec.DEFAULT_CADE["steps"]
    step_size: float = spec.DEFAULT_CADE["step_size"]
    range_scaled: bool = False
    clip_to_support: bool = False

    def __post_init__(self):
        for name in ("S", "modes", "epsilons", "substitutes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        bad = [m for m in self.modes if m not in spec.ATTACK_MODES]
        if bad:
            raise ConfigError(f"Unknown attack mode(s) {bad}. Available: {', '.join(spec.ATTACK_MODES)}")
        if not self.modes or not self.epsilons:
            raise ConfigError(f"attack '{self.label}' needs at least one mode and one epsilon")
        if any(e < 0 for e in self.epsilons):
            raise ConfigError(f"attack '{self.label}' has a negative epsilon")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: DatasetSpec
    victims: Tuple[VictimSpec, ...]
    attacks: Tuple[AttackGridSpec, ...] = ()
    seeds: Tuple[int, ...] = (0,)
    output: str = "runs"
    n_attack: int = 500
    workers: int = 1
    version: str = spec.CONFIG_VERSION

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.n_attack < 1 or self.workers < 1:
            raise ConfigError("n_attack and workers must be positive")
        names = [v.name for v in self.victims]
        if len(set(names)) != len(names):
            raise ConfigError(f"victim names must be unique, got {names}")
        scm, _ = SCM_BUILDERS[self.dataset.generator](self.dataset.params)
        for grid in self.attacks:
            for v in grid.S:
                if v not in scm.names:
                    raise ConfigError(f"attack '{grid.label}': unknown variable '{v}'. Available: {', '.join(scm.names)}")
            for sub in grid.substitutes:
                if sub != spec.SUBSTITUTE_NONE and sub not in names:
                    raise ConfigError(f"attack '{grid.label}': unknown substitute '{sub}'")
            if any(m in ("whitebox", "fgsm", "pgd") for m in grid.modes) and not self.victims:
                raise ConfigError(f"attack '{grid.label}' needs trained victims")

    def with_seeds(self, seeds) -> "ExperimentConfig":
        return replace(self, seeds=tuple(int(s) for s in seeds))

    def with_epsilons(self, epsilons) -> "ExperimentConfig":
        eps = tuple(float(e) for e in epsilons)
        return replace(self, attacks=tuple(replace(g, epsilons=eps) for g in self.attacks))

    def to_dict(self) -> Dict[str, Any]:
        doc = asdict(self)
        doc["version"] = self.version
        return doc

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        version = data.get("version")
        if version != spec.CONFIG_VERSION:
            raise ConfigError(f"unsupported config version '{version}'")
        try:
            return cls(
                name=data["name"],
                dataset=DatasetSpec(**data["dataset"]),
                victims=tuple(VictimSpec(**v) for v in data.get("victims", [])),
                attacks=tuple(AttackGridSpec(**a) for a in data.get("attacks", [])),
                seeds=tuple(int(s) for s in data.get("seeds", (0,))),
                output=data.get("output", f"runs/{data['name']}"),
                n_attack=int(data.get("n_attack", 500)),
                workers=int(data.get("workers", 1)),
                version=version,
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed config: {e}") from None

    def save(self, filepath: str | Path):
        write_json(filepath, self.to_dict(), "config")


def bundled_configs() -> List[str]:
    root = resources.files("cade") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(source: str | Path) -> ExperimentConfig:
    """Load a config from a path, or by bundled name (e.g. 'pendulum-sim')."""
    path = Path(source)
    if path.exists():
        return ExperimentConfig.from_dict(read_json(path, "config"))
    bundled = resources.files("cade") / "configs" / f"{source}.json"
    if bundled.is_file():
        return ExperimentConfig.from_dict(read_json(Path(str(bundled)), "config"))
    raise FileNotFoundError(f"Config not found: {source}. Bundled: {', '.join(bundled_configs())}")


def cell_name(label: str, mode: str, epsilon: float, substitute: str) -> str:
    """File-safe cell identifier, e.g. 'C1-i-eps0.3-MLP'."""
    raw = f"{label}-{MODE_SUFFIX[mode]}-eps{epsilon:g}-{substitute}"
    return "".join(ch if ch.isalnum() or ch in "-_.+" else "_" for ch in raw)
