"""Experiment manifests: the typed form of one CLI invocation."""

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

from radonbl.core.errors import ManifestError


class Command(str, Enum):
    BL = "bl"
    POLY = "poly"
    NONCONC = "nonconc"
    RADON = "radon"
    IFT = "ift"
    REGRESS = "regress"


_MODEL_KEYS = {"model", "n", "k", "lambda"}

# parameter keys accepted by each (command, action)
ALLOWED_PARAMETERS: dict[tuple[Command, str], frozenset[str]] = {
    (Command.BL, "compute"): frozenset({"datum", "datum_file", "method", "max_iters", "tol"}),
    (Command.BL, "verify-scaling"): frozenset({"datum", "datum_file", "trials", "rtol"}),
    (Command.POLY, "eval"): frozenset(_MODEL_KEYS | {"t", "budget", "pattern"}),
    (Command.POLY, "vandermonde"): frozenset({"n", "t"}),
    (Command.POLY, "invariance"): frozenset(_MODEL_KEYS | {"t", "trials"}),
    (Command.POLY, "contraction"): frozenset({"partition_i", "partition_j"}),
    (Command.NONCONC, "convprop"): frozenset(
        {"space_file", "degree", "points", "delta", "checks"}
    ),
    (Command.NONCONC, "separate"): frozenset({"intervals", "n"}),
    (Command.NONCONC, "density-k"): frozenset({"n", "k", "lambda"}),
    (Command.NONCONC, "derivative-id"): frozenset({"n", "k", "lambda", "u", "base", "orders"}),
    (Command.RADON, "apply"): frozenset(_MODEL_KEYS | {"box_lo", "box_hi", "x", "samples"}),
    (Command.RADON, "knapp"): frozenset(
        _MODEL_KEYS | {"p", "q", "power_shift", "deltas", "samples", "samples_t", "strata"}
    ),
    (Command.IFT, "solve"): frozenset(_MODEL_KEYS | {"x0", "y", "r", "c"}),
    (Command.IFT, "fiber"): frozenset(_MODEL_KEYS | {"x0", "y", "r", "c", "C", "grid"}),
    (Command.IFT, "normalize"): frozenset(_MODEL_KEYS | {"x", "y"}),
    (Command.REGRESS, "compare"): frozenset({"baseline", "current", "rtol"}),
}


@dataclass
class Manifest:
    """One experiment: command, action, parameters, seed and output path."""

    command: Command
    action: str
    parameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    output_path: Optional[str] = None

    def __post_init__(self):
        try:
            self.command = Command(self.command)
        except ValueError as e:
            raise ManifestError(f"unknown command {self.command!r}") from e
        allowed = ALLOWED_PARAMETERS.get((self.command, self.action))
        if allowed is None:
            raise ManifestError(f"unknown action {self.action!r} for {self.command.value}")
        unknown = sorted(set(self.parameters) - allowed)
        if unknown:
            raise ManifestError(
                f"unknown parameters for {self.command.value} {self.action}: {', '.join(unknown)}"
            )
        if self.seed is None:
            self.seed = 0
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ManifestError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    def get(self, key: str, default: Any = None) -> Any:
        value = self.parameters.get(key)
        return default if value is None else value

    def to_dict(self) -> dict:
        return {
            "command": self.command.value,
            "action": self.action,
            "parameters": self.parameters,
            "seed": self.seed,
            "output_path": self.output_path,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Manifest":
        extra = set(payload) - {"command", "action", "parameters", "seed", "output_path"}
        if extra:
            raise ManifestError(f"unknown manifest keys: {', '.join(sorted(extra))}")
        if "command" not in payload or "action" not in payload:
            raise ManifestError("manifest needs 'command' and 'action'")
        parameters = payload.get("parameters") or {}
        if not isinstance(parameters, dict):
            raise ManifestError("'parameters' must be an object")
        return cls(
            command=payload["command"],
            action=payload["action"],
            parameters=dict(parameters),
            seed=payload.get("seed", 0),
            output_path=payload.get("output_path"),
        )


def load_manifest(path: Union[str, Path]) -> Manifest:
    """Read a JSON manifest file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from e
    if not isinstance(payload, dict):
        raise ManifestError("manifest must be a JSON object")
    return Manifest.from_dict(payload)
