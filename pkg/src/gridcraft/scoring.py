"""Achievement ledger, per-step reward, and the aggregate score metric."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Canonical achievement roster; order is part of the public stats schema.
ACHIEVEMENTS = (
    "collect_wood",
    "collect_stone",
    "collect_coal",
    "collect_iron",
    "collect_diamond",
    "collect_drink",
    "collect_sapling",
    "eat_cow",
    "eat_plant",
    "defeat_zombie",
    "defeat_skeleton",
    "make_wood_pickaxe",
    "make_stone_pickaxe",
    "make_iron_pickaxe",
    "make_wood_sword",
    "make_stone_sword",
    "make_iron_sword",
    "place_stone",
    "place_table",
    "place_furnace",
    "place_plant",
    "wake_up",
)

N_ACHIEVEMENTS = len(ACHIEVEMENTS)
_ACH_SET = frozenset(ACHIEVEMENTS)


@dataclass
class AchievementLedger:
    """Tracks unlocks within the running episode and across a whole run.

    `unlocked` is the current episode's set and only grows until
    finish_episode folds it into the per-run totals.
    """

    episodes: int = 0
    totals: dict = field(default_factory=dict)
    unlocked: set = field(default_factory=set)

    def unlock(self, names) -> set:
        """Record achievements for this step; returns only the new ones."""
        fresh = set()
        for name in names:
            if name not in _ACH_SET:
                raise ValueError(f"unknown achievement {name!r}")
            if name not in self.unlocked:
                self.unlocked.add(name)
                fresh.add(name)
        return fresh

    def finish_episode(self) -> frozenset:
        snapshot = frozenset(self.unlocked)
        self.episodes += 1
        for name in snapshot:
            self.totals[name] = self.totals.get(name, 0) + 1
        self.unlocked.clear()
        return snapshot

    def merge(self, other: "AchievementLedger") -> "AchievementLedger":
        """Associative combination of two finished ledgers."""
        if self.unlocked or other.unlocked:
            raise ValueError("merge requires finished ledgers (no open episode)")
        totals = dict(self.totals)
        for name, count in other.totals.items():
            totals[name] = totals.get(name, 0) + count
        return AchievementLedger(episodes=self.episodes + other.episodes, totals=totals)


def reward(events, ledger: AchievementLedger):
    """Reward for one step: 1 per first-time unlock, 0.1 per health point.

    Re-unlocks within the same episode contribute nothing. Returns the
    scalar and the updated ledger.
    """
    fresh = ledger.unlock(events.achievements)
    r = float(len(fresh)) + 0.1 * events.health_delta
    return r, ledger


def crafter_score(success_rates) -> float:
    """Geometric-style aggregate over achievement success percentages.

    exp(mean of ln(1+s_i)) - 1, mapping the all-zero vector to 0 and the
    all-100 vector to 100. Log-space averaging weights rare achievements
    more than frequent ones. The aggregation runs in extended precision
    so both boundary vectors land on their exact values after rounding
    to a double.
    """
    rates = list(success_rates)
    if len(rates) != N_ACHIEVEMENTS:
        raise ValueError(f"expected {N_ACHIEVEMENTS} rates, got {len(rates)}")
    total = np.zeros((), dtype=np.longdouble)
    for s in rates:
        if not 0.0 <= s <= 100.0:
            raise ValueError(f"success rate {s} outside [0, 100]")
        total += np.log1p(np.longdouble(s))
    return float(np.expm1(total / N_ACHIEVEMENTS))


def success_rates(ledger: AchievementLedger):
    """Percentage of finished episodes unlocking each achievement in order."""
    if ledger.episodes < 1:
        raise ValueError("no finished episodes")
    return [100.0 * ledger.totals.get(a, 0) / ledger.episodes for a in ACHIEVEMENTS]
