"""Checkpoint files: JSON with decimal-text parameters that round-trip exactly.

Python's repr of a float is the shortest string that parses back to the same
IEEE-754 double, so dumping parameters through the standard json module loses
nothing; a reloaded policy is bit-identical to the saved one.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .policy import PolicyParams

FORMAT_VERSION = 1

_STAGES = ("mia", "cam")


def save_checkpoint(path: str | Path, params: PolicyParams, *, stage: str,
                    generation: int, master_seed: int, config_hash: str,
                    agent_id: int | None = None) -> None:
    if stage not in _STAGES:
        raise ValueError(f"stage must be one of {_STAGES}")
    if generation < 0:
        raise ValueError("generation must be >= 0")
    payload = {
        "format_version": FORMAT_VERSION,
        "stage": stage,
        "generation": generation,
        "agent_id": agent_id,
        "master_seed": master_seed,
        "config_hash": config_hash,
        "policy": params.describe(),
        "params": [float(x) for x in params.flat],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True) + "\n")


def load_checkpoint(path: str | Path) -> tuple[PolicyParams, dict]:
    """Load and validate a checkpoint; returns (params, metadata)."""
    path = Path(path)
    data = json.loads(path.read_text())
    if not isinstance(data, dict):
        raise ValueError(f"checkpoint {path} must hold a JSON object")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"checkpoint {path} has format_version {version!r}, "
                         f"expected {FORMAT_VERSION}")
    for key in ("stage", "generation", "master_seed", "config_hash", "policy", "params"):
        if key not in data:
            raise ValueError(f"checkpoint {path} is missing key '{key}'")
    if data["stage"] not in _STAGES:
        raise ValueError(f"checkpoint {path} has unknown stage {data['stage']!r}")
    desc = data["policy"]
    flat = np.array(data["params"], dtype=np.float64)
    if not np.all(np.isfinite(flat)):
        raise ValueError(f"checkpoint {path} holds non-finite parameters")
    params = PolicyParams(
        kind=desc["kind"],
        flat=flat,
        n_ids=int(desc["n_ids"]),
        n_actions=int(desc["n_actions"]),
        n_states=int(desc.get("n_states", 0)),
        obs_dim=int(desc.get("obs_dim", 0)),
        hidden=int(desc.get("hidden", 0)),
    )
    meta = {k: data[k] for k in ("format_version", "stage", "generation",
                                 "agent_id", "master_seed", "config_hash")}
    return params, meta
