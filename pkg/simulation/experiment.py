"""Experiment files: JSON with `model`, `test`, `campaign` and `output` sections."""
import json
from dataclasses import dataclass, field
from typing import List, Optional

from config import MAX_HYPOTHESES
from simulation.dataset import ProcedureSpec
from simulation.model import SourceModel
from utils.errors import ConfigError, DimensionError
from utils.matchings import ensure_enumerable


@dataclass
class ExperimentConfig:
    """
    One simulation experiment.

    Attributes:
        name (str): Label used in printed summaries.
        model (SourceModel): Generating model, membership-checked on parse.
        test (ProcedureSpec): Test to simulate.
        horizons (list[int]): N grid, sorted.
        trials (int): Trials per horizon.
        master_seed (int): Root of all randomness; required.
        parallelism (int): DataLoader worker count.
        output_json (str | None): Report path.
        output_csv (str | None): Per-(N, error type) table path.
    """

    name: str
    model: SourceModel
    test: ProcedureSpec
    horizons: List[int]
    trials: int
    master_seed: int
    parallelism: int = 1
    output_json: Optional[str] = None
    output_csv: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, spec: dict) -> "ExperimentConfig":
        for section in ("model", "test", "campaign"):
            if section not in spec:
                raise ConfigError(f"Experiment is missing the '{section}' section")
        campaign = spec["campaign"]
        if "master_seed" not in campaign:
            raise ConfigError("campaign.master_seed is required")
        model = SourceModel.from_dict(spec["model"])
        try:
            ensure_enumerable(model.dims, MAX_HYPOTHESES)
        except DimensionError as e:
            raise ConfigError(str(e)) from e

        horizons = sorted(int(n) for n in spec["test"].get("horizons", []))
        if not horizons or horizons[0] < 2:
            raise ConfigError(f"test.horizons needs values >= 2, got {horizons}")
        trials = int(campaign.get("trials", 0))
        if trials < 1:
            raise ConfigError(f"campaign.trials must be positive, got {trials}")
        parallelism = int(campaign.get("parallelism", 1))
        if parallelism < 1:
            raise ConfigError(f"campaign.parallelism must be positive, got {parallelism}")

        output = spec.get("output", {})
        return cls(
            name=spec.get("name", "experiment"),
            model=model,
            test=ProcedureSpec.from_dict(spec["test"]),
            horizons=horizons,
            trials=trials,
            master_seed=int(campaign["master_seed"]),
            parallelism=parallelism,
            output_json=output.get("json"),
            output_csv=output.get("csv"),
            extra={k: v for k, v in spec.items() if k not in ("name", "model", "test", "campaign", "output")}
        )

    def to_dict(self) -> dict:
        test = self.test.to_dict()
        test["horizons"] = list(self.horizons)
        output = {}
        if self.output_json is not None:
            output["json"] = self.output_json
        if self.output_csv is not None:
            output["csv"] = self.output_csv
        spec = {
            "name": self.name,
            "model": self.model.to_dict(),
            "test": test,
            "campaign": {"trials": self.trials, "master_seed": self.master_seed, "parallelism": self.parallelism},
            "output": output,
        }
        spec.update(self.extra)
        return spec


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r") as f:
            spec = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    return ExperimentConfig.from_dict(spec)


def dump_config(cfg: ExperimentConfig, path: str = None) -> str:
    """Serialize `cfg`; parsing the result gives back an equal config."""
    text = json.dumps(cfg.to_dict(), indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as f:
            f.write(text + "\n")
    return text
