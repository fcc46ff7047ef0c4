"""Loader for the declarative rule table shipped with the package.

Rules are plain data so a gameplay discrepancy is a one-line yaml fix, and
tests can run controlled variants (e.g. no vital decay) via overrides.
"""

from __future__ import annotations

import copy
from importlib import resources

import yaml

from .worldgen import Material

RULES_VERSION = 1

_MATERIAL_BY_NAME = {m.name.lower(): m for m in Material}

ITEMS = (
    "wood", "stone", "coal", "iron", "diamond", "sapling",
    "wood_pickaxe", "stone_pickaxe", "iron_pickaxe",
    "wood_sword", "stone_sword", "iron_sword",
)

VITALS = ("health", "food", "water", "energy")


class RulesError(ValueError):
    pass


def material_named(name: str) -> Material:
    try:
        return _MATERIAL_BY_NAME[name]
    except KeyError:
        raise RulesError(f"unknown material {name!r}") from None


class Ruleset:
    """Validated view over the rule document; immutable after construction."""

    def __init__(self, doc: dict):
        if doc.get("version") != RULES_VERSION:
            raise RulesError(f"rules version {doc.get('version')!r}, expected {RULES_VERSION}")
        self.doc = doc
        self.collect = {}
        for name, spec in doc["collect"].items():
            spec = dict(spec)
            spec["leaves"] = material_named(spec["leaves"])
            spec.setdefault("probability", 1.0)
            spec.setdefault("yields", {})
            spec.setdefault("vital", None)
            tool = spec.get("tool")
            if tool is not None and tool not in ITEMS:
                raise RulesError(f"collect.{name}: unknown tool {tool!r}")
            for item in spec["yields"]:
                if item not in ITEMS:
                    raise RulesError(f"collect.{name}: unknown item {item!r}")
            self.collect[material_named(name)] = spec
        self.place = {}
        for name, spec in doc["place"].items():
            spec = dict(spec)
            spec["on"] = frozenset(material_named(m) for m in spec["bases"])
            spec["puts"] = material_named(spec["puts"])
            self.place[name] = spec
        self.make = {}
        for name, spec in doc["make"].items():
            spec = dict(spec)
            spec["nearby"] = tuple(material_named(m) for m in spec["nearby"])
            self.make[name] = spec
        self.vitals = dict(doc["vitals"])
        self.combat = copy.deepcopy(doc["combat"])
        self.creatures = dict(doc["creatures"])
        self.world = dict(doc["world"])

    def with_overrides(self, overrides: dict) -> "Ruleset":
        """New ruleset with nested keys replaced, e.g. {"vitals": {...}}."""
        doc = copy.deepcopy(self.doc)
        for section, values in overrides.items():
            if section not in doc:
                raise RulesError(f"unknown rules section {section!r}")
            if isinstance(values, dict):
                _deep_update(doc[section], values)
            else:
                doc[section] = values
        return Ruleset(doc)


def _deep_update(base: dict, extra: dict):
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value


def load_rules(overrides: dict | None = None) -> Ruleset:
    text = resources.files("gridcraft").joinpath("rules.yaml").read_text()
    rules = Ruleset(yaml.safe_load(text))
    if overrides:
        rules = rules.with_overrides(overrides)
    return rules


# Convenient test variant: nothing decays, nights stay safe.
NO_DECAY = {
    "vitals": {"food_interval": 10 ** 9, "water_interval": 10 ** 9,
               "energy_interval": 10 ** 9},
    "creatures": {"spawn_prob_per_deficit": 0.0},
}
