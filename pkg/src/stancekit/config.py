"""Flat key-value configuration.

Config files are ``key = value`` lines with ``#`` comments. Precedence is
CLI flag > environment variable > config file > built-in default; secrets
(translation/LLM keys) travel only through the environment. The built-in
defaults below define the stock pivot chains, prompt definition sentences,
the model registry and the ensemble presets, so all of them can be
re-pointed without code changes.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Mapping

from . import augment, ensemble, prompting
from .errors import UsageError
from .train import ModelEntry, default_registry


def _default_config() -> dict[str, str]:
    cfg: dict[str, str] = {}
    for chain in augment.DEFAULT_CHAINS:
        cfg[f"chain.{chain.chain_id}"] = augment.format_chain_spec(chain)
    for task_id, sentence in prompting.DEFAULT_DEFINITIONS.items():
        cfg[f"prompt.definition.{task_id}"] = sentence
    cfg["llm.temperature"] = "0"
    for key, entry in default_registry().items():
        cfg[f"model.{key}.encoder"] = entry.encoder_ref
    for name, members in ensemble.PRESET_MEMBERS.items():
        cfg[f"ensemble.{name}.members"] = ",".join(members)
        cfg[f"ensemble.{name}.mode"] = "weighted"
    cfg["ensemble.default.tie_break"] = "highest_weight_member"
    return cfg


DEFAULT_CONFIG = _default_config()


def load_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def effective_config(path=None) -> dict[str, str]:
    cfg = dict(DEFAULT_CONFIG)
    if path is not None:
        cfg.update(load_config_file(path))
    return cfg


def config_hash(cfg: Mapping[str, str]) -> str:
    """Stable across re-serialization: hash of the sorted key-value pairs."""
    blob = json.dumps(dict(cfg), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def resolve(cli_value, env_var: str | None, cfg: Mapping[str, str], key: str,
            default=None):
    """Apply the flag > env > config file > default precedence."""
    if cli_value is not None:
        return cli_value
    if env_var:
        env_value = os.environ.get(env_var)
        if env_value is not None:
            return env_value
    if key in cfg:
        return cfg[key]
    return default


def chains_from_config(cfg: Mapping[str, str]) -> list[augment.AugmentationChain]:
    chains = []
    for key, value in cfg.items():
        if key.startswith("chain."):
            chains.append(augment.parse_chain_spec(key[len("chain."):], value))
    return chains


def definitions_from_config(cfg: Mapping[str, str]) -> dict[str, str]:
    prefix = "prompt.definition."
    return {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix)}


def registry_from_config(cfg: Mapping[str, str]) -> dict[str, ModelEntry]:
    registry = default_registry()
    for key, value in cfg.items():
        parts = key.split(".")
        if len(parts) == 3 and parts[0] == "model" and parts[2] == "encoder":
            registry[parts[1]] = ModelEntry(parts[1], value)
    return registry


def ensemble_from_config(
    cfg: Mapping[str, str],
    name: str,
    mode: str | None = None,
    weights: list[float] | None = None,
    tie_break: str | None = None,
) -> ensemble.EnsembleConfig:
    members_key = f"ensemble.{name}.members"
    if members_key not in cfg:
        raise UsageError(f"no ensemble named {name!r} in config")
    keys = [k.strip() for k in cfg[members_key].split(",") if k.strip()]
    mode = mode or cfg.get(f"ensemble.{name}.mode", "weighted")
    tie_break = tie_break or cfg.get(
        f"ensemble.{name}.tie_break", cfg.get("ensemble.default.tie_break",
                                              "highest_weight_member")
    )
    if weights is None:
        raw = cfg.get(f"ensemble.{name}.weights")
        if raw:
            weights = [float(w) for w in raw.split(",")]
        else:
            weights = [1.0] * len(keys)
    if len(weights) != len(keys):
        raise UsageError(
            f"ensemble {name}: {len(keys)} members but {len(weights)} weights"
        )
    return ensemble.EnsembleConfig(mode, tuple(zip(keys, weights)), tie_break, name)
