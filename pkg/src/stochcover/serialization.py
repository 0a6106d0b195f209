"""Instance JSON reading and writing."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError
from .instance import Instance
from .utility import utility_from_dict


def instance_to_dict(inst: Instance) -> dict:
    out = {
        "n": inst.n,
        "k": inst.k,
        "costs": list(inst.costs),
        "probs": [list(row) for row in inst.probs],
        "integer_valued": inst.integer_valued,
        "utility": inst.utility.to_dict(),
    }
    if inst.declared_eta is not None:
        out["eta"] = inst.declared_eta
    return out


def instance_from_dict(obj: dict) -> Instance:
    try:
        costs = obj["costs"]
        probs = obj["probs"]
        utility = utility_from_dict(obj["utility"])
        n, k = int(obj["n"]), int(obj["k"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed instance: {exc}") from exc
    if len(costs) != n or len(probs) != n or any(len(row) != k for row in probs):
        raise ConfigError(f"instance dimensions disagree with n={n}, k={k}")
    return Instance(
        costs,
        probs,
        utility,
        integer_valued=bool(obj.get("integer_valued", False)),
        declared_eta=obj.get("eta"),
    )


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2)


def load_instances(path) -> list:
    """Read one instance or a list of instances from a JSON file."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if isinstance(data, list):
        return [instance_from_dict(d) for d in data]
    return [instance_from_dict(data)]
