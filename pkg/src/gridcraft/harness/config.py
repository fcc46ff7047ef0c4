"""One declarative config document with env / agent / ppo / server sections.

CLI flags override file values; unknown keys are rejected so typos fail
loudly instead of silently training the wrong thing.
"""

import dataclasses

import yaml

from ..agents import ARCHITECTURES, AgentConfig
from ..oodconfig import (NUM_PRESETS, ConfigError, EnvSpec, builtin_presets,
                         numbers_spec, uniform_appearance)
from ..ppo import PPOConfig

SECTIONS = ("env", "agent", "ppo", "server")

SERVER_DEFAULTS = {
    "host": "127.0.0.1",
    "port": 8765,
    "stats_log": "human_stats.jsonl",
    "static_dir": None,
    "checkpoint": None,   # set to spectate a trained policy
    "seed": 0,
}


def load_config(path):
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be a mapping, got {type(doc).__name__}")
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}; "
                          f"expected subset of {list(SECTIONS)}")
    return doc


def resolve_preset(name):
    """Preset name -> EnvSpec. Accepts numbers presets and scenario names.

    Scenario names (app_o1_97, num_easy_x2_to_default, ...) resolve to the
    evaluation side of the pair, which is the side scores are reported on.
    """
    if name in NUM_PRESETS:
        return numbers_spec(name)
    pairs = builtin_presets()
    if name in pairs:
        return pairs[name][1]
    raise ConfigError(f"unknown preset {name!r}; numbers presets: "
                      f"{sorted(NUM_PRESETS)}; scenarios: {sorted(pairs)}")


def build_env_spec(section):
    """env section -> EnvSpec. A preset provides the base; explicit keys
    (counts, appearance as a 4-vector, episode_cap, world, show_inventory)
    override it field by field."""
    section = dict(section or {})
    preset = section.pop("preset", None)
    base = resolve_preset(preset) if preset else EnvSpec()
    known = {"appearance", "counts", "episode_cap", "world", "show_inventory",
             "numbers_name", "seed_policy"}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown env keys {sorted(unknown)}")
    if "appearance" in section:
        section["appearance"] = uniform_appearance(tuple(section["appearance"]))
    if "counts" in section:
        section["counts"] = {**base.counts, **section["counts"]}
    d = base.to_dict()
    d.update(section)
    return EnvSpec.from_dict(d)


def build_agent_config(section):
    section = dict(section or {})
    arch = section.pop("architecture", "ppo_cnn")
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture {arch!r}; have {list(ARCHITECTURES)}")
    cfg = AgentConfig.default(arch)
    known = {f.name for f in dataclasses.fields(AgentConfig)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown agent keys {sorted(unknown)}")
    if "cnn_channels" in section:
        section["cnn_channels"] = tuple(section["cnn_channels"])
    return dataclasses.replace(cfg, **section)


def build_ppo_config(section):
    section = dict(section or {})
    known = {f.name for f in dataclasses.fields(PPOConfig)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown ppo keys {sorted(unknown)}")
    return PPOConfig(**section)


def build_server_config(section):
    section = dict(section or {})
    unknown = set(section) - set(SERVER_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown server keys {sorted(unknown)}")
    return {**SERVER_DEFAULTS, **section}
