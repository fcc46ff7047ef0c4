"""Environment families: appearance-variant distributions and count scalings.

Two orthogonal axes. The appearance axis reweights which of the four visual
variants each object class spawns with, between training and evaluation.
The numbers axis rescales how many resources and enemies the world holds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

# Object classes that come in four visual variants.
VARIANT_CLASSES = ("tree", "cow", "zombie", "stone", "coal", "skeleton")

THIRD = 1.0 / 3.0

# Count targets per scaling preset: tree, coal, cow, zombie, skeleton.
# Iron is not rescaled by any preset.
NUM_PRESETS = {
    "default": {"tree": 189.0, "coal": 50.0, "cow": 26.0, "zombie": 15.0, "skeleton": 9.5},
    "easy_x2": {"tree": 380.0, "coal": 102.0, "cow": 46.0, "zombie": 6.0, "skeleton": 4.5},
    "easy_x4": {"tree": 764.0, "coal": 206.0, "cow": 100.0, "zombie": 3.0, "skeleton": 2.5},
    "hard_x2": {"tree": 95.0, "coal": 27.0, "cow": 13.0, "zombie": 33.0, "skeleton": 19.0},
    "hard_x4": {"tree": 52.0, "coal": 12.5, "cow": 6.0, "zombie": 60.0, "skeleton": 38.0},
    "mix_x4": {"tree": 764.0, "coal": 206.0, "cow": 100.0, "zombie": 60.0, "skeleton": 38.0},
}

DEFAULT_IRON = 20.0

# Training-side O1 weights for the appearance scenarios, in difficulty order.
_APP_TRAIN_P1 = (0.25, 0.52, 0.76, 0.88, 0.94, 0.97, 1.0)
_APP_EVAL = (0.0, THIRD, THIRD, THIRD)


class ConfigError(ValueError):
    pass


def _validate_dist(p) -> tuple:
    p = tuple(float(x) for x in p)
    if len(p) != 4:
        raise ConfigError(f"variant distribution needs 4 entries, got {len(p)}")
    if any(x < 0 for x in p):
        raise ConfigError(f"negative probability in {p}")
    if abs(sum(p) - 1.0) > 1e-9:
        raise ConfigError(f"probabilities sum to {sum(p)!r}, not 1")
    return p


def uniform_appearance(p=(1.0, 0.0, 0.0, 0.0)) -> dict:
    """Same variant distribution for every varied class."""
    p = _validate_dist(p)
    return {c: p for c in VARIANT_CLASSES}


@dataclass
class EnvSpec:
    """Complete declarative description of one environment configuration."""

    appearance: dict = field(default_factory=uniform_appearance)
    counts: dict = field(default_factory=lambda: dict(NUM_PRESETS["default"]))
    numbers_name: str = "default"
    show_inventory: bool = True
    seed_policy: str = "split"
    episode_cap: int = 10000
    world: dict = field(default_factory=dict)  # optional worldgen overrides

    def __post_init__(self):
        self.appearance = {c: _validate_dist(p) for c, p in self.appearance.items()}
        for c in VARIANT_CLASSES:
            if c not in self.appearance:
                raise ConfigError(f"appearance missing class {c!r}")
        self.counts = {k: float(v) for k, v in self.counts.items()}
        self.counts.setdefault("iron", DEFAULT_IRON)

    def to_dict(self) -> dict:
        return {
            "appearance": {c: list(p) for c, p in self.appearance.items()},
            "counts": dict(self.counts),
            "numbers_name": self.numbers_name,
            "show_inventory": self.show_inventory,
            "seed_policy": self.seed_policy,
            "episode_cap": self.episode_cap,
            "world": dict(self.world),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvSpec":
        return cls(
            appearance={c: tuple(p) for c, p in d["appearance"].items()},
            counts=d["counts"],
            numbers_name=d.get("numbers_name", "custom"),
            show_inventory=d.get("show_inventory", True),
            seed_policy=d.get("seed_policy", "split"),
            episode_cap=d.get("episode_cap", 10000),
            world=d.get("world", {}),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def numbers_spec(preset: str, show_inventory=True) -> EnvSpec:
    if preset not in NUM_PRESETS:
        raise ConfigError(f"unknown numbers preset {preset!r}; have {sorted(NUM_PRESETS)}")
    return EnvSpec(counts=dict(NUM_PRESETS[preset]), numbers_name=preset,
                   show_inventory=show_inventory)


def appearance_spec(p, show_inventory=True) -> EnvSpec:
    return EnvSpec(appearance=uniform_appearance(p), show_inventory=show_inventory)


def builtin_presets():
    """All 16 (train, eval) scenario pairs: name -> (EnvSpec, EnvSpec).

    The first is in-distribution; the other 15 shift appearance frequencies
    or object counts between training and evaluation.
    """
    pairs = {}
    pairs["app_indist"] = (appearance_spec((1.0, 0.0, 0.0, 0.0)),
                           appearance_spec((1.0, 0.0, 0.0, 0.0)))
    for p1 in _APP_TRAIN_P1:
        rest = tuple(round((1.0 - p1) / 3.0, 10) for _ in range(3))
        train = appearance_spec((p1,) + rest)
        label = f"app_o1_{int(round(p1 * 100))}"
        pairs[label] = (train, appearance_spec(_APP_EVAL))
    for train_name, eval_name in (
        ("easy_x2", "default"),
        ("easy_x4", "default"),
        ("mix_x4", "default"),
        ("default", "mix_x4"),
        ("default", "easy_x2"),
        ("default", "easy_x4"),
        ("easy_x2", "hard_x2"),
        ("easy_x4", "hard_x4"),
    ):
        pairs[f"num_{train_name}_to_{eval_name}"] = (
            numbers_spec(train_name), numbers_spec(eval_name))
    return pairs


def sample_variant(obj_class: str, dist: dict, rng) -> int:
    """Draw a variant id 1..4 for one object; consumes exactly one draw."""
    p = dist.get(obj_class)
    if p is None:
        raise ConfigError(f"no distribution for class {obj_class!r}")
    p = _validate_dist(p)
    u = rng.uniform()
    acc = 0.0
    for i, w in enumerate(p):
        acc += w
        if u < acc:
            return i + 1
    return 4  # u landed in the float-rounding sliver at the top
