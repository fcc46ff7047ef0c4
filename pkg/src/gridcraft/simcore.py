"""Game state machine: actions, vitals, crafting, creatures, day/night.

One step() call applies exactly one tick: player action first, then plant
growth, then creature AI, then vital decay/regen, then the clock. All
randomness flows through named counter-based streams carried on the state,
so (state, action) -> successor is a pure deterministic function.

Hot-path note: cell materials and creature occupancy are mirrored into
python-native structures (bytearray / dict) because scalar numpy indexing
is several times slower; the numpy grid stays authoritative for rendering
and vectorized queries, and every mutation goes through set_cell.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from .oodconfig import sample_variant
from .rng import Stream, fold
from .worldgen import Material, WorldMap, round_half_up

MAX_VITAL = 9


class Action(IntEnum):
    NOOP = 0
    MOVE_UP = 1
    MOVE_DOWN = 2
    MOVE_LEFT = 3
    MOVE_RIGHT = 4
    DO = 5
    SLEEP = 6
    PLACE_STONE = 7
    PLACE_TABLE = 8
    PLACE_FURNACE = 9
    PLACE_PLANT = 10
    MAKE_WOOD_PICKAXE = 11
    MAKE_STONE_PICKAXE = 12
    MAKE_IRON_PICKAXE = 13
    MAKE_WOOD_SWORD = 14
    MAKE_STONE_SWORD = 15
    MAKE_IRON_SWORD = 16


N_ACTIONS = len(Action)
# dict lookup beats the Enum constructor on the hot path; also accepts
# Action members themselves since they hash as their value
_ACTION_OF = {int(a): a for a in Action}

# facing codes and their cell offsets
UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
OFFSETS = ((0, -1), (0, 1), (-1, 0), (1, 0))
_MOVE_FACING = {Action.MOVE_UP: UP, Action.MOVE_DOWN: DOWN,
                Action.MOVE_LEFT: LEFT, Action.MOVE_RIGHT: RIGHT}

# creature kind codes
COW, ZOMBIE, SKELETON, ARROW = 0, 1, 2, 3
KIND_NAMES = ("cow", "zombie", "skeleton", "arrow")
KIND_CODES = {n: i for i, n in enumerate(KIND_NAMES)}

# materials the player may step onto (lava is deadly but enterable)
_PLAYER_WALK = bytearray(32)
for _m in (Material.GRASS, Material.SAND, Material.PATH, Material.LAVA):
    _PLAYER_WALK[_m] = 1
# materials creatures may occupy
_CREATURE_WALK = bytearray(32)
for _m in (Material.GRASS, Material.SAND, Material.PATH):
    _CREATURE_WALK[_m] = 1

# plant growth stages kept in the variant grid
PLANT_YOUNG, PLANT_RIPE = 1, 2

ACTIVE_RADIUS = 16  # creatures farther than this from the player idle

_SWORD_TIERS = ("iron_sword", "stone_sword", "wood_sword")

_MATERIAL_TO_CLASS = {Material.TREE: "tree", Material.STONE: "stone", Material.COAL: "coal"}
_CREATURE_CLASS = {COW: "cow", ZOMBIE: "zombie", SKELETON: "skeleton"}


class ContractError(RuntimeError):
    """A caller violated an operation precondition."""


class Creature:
    __slots__ = ("kind", "x", "y", "hp", "variant", "cd", "dx", "dy")

    def __init__(self, kind, x, y, hp, variant=1, dx=0, dy=0):
        self.kind = kind
        self.x = x
        self.y = y
        self.hp = hp
        self.variant = variant
        self.cd = 0
        self.dx = dx
        self.dy = dy


class PlayerState:
    __slots__ = ("x", "y", "facing", "health", "food", "water", "energy",
                 "inventory", "sleeping", "hunger", "thirst", "fatigue",
                 "starve", "regen")

    def __init__(self, x, y):
        self.x = x
        self.y = y
        self.facing = DOWN
        self.health = MAX_VITAL
        self.food = MAX_VITAL
        self.water = MAX_VITAL
        self.energy = MAX_VITAL
        self.inventory = {item: 0 for item in (
            "wood", "stone", "coal", "iron", "diamond", "sapling",
            "wood_pickaxe", "stone_pickaxe", "iron_pickaxe",
            "wood_sword", "stone_sword", "iron_sword")}
        self.sleeping = False
        # decay/regen accumulators, in steps
        self.hunger = 0
        self.thirst = 0
        self.fatigue = 0
        self.starve = 0
        self.regen = 0


class StepEvents:
    __slots__ = ("achievements", "health_delta", "died")

    def __init__(self):
        self.achievements = set()
        self.health_delta = 0
        self.died = False


class WorldState:
    __slots__ = ("map", "player", "creatures", "step_count", "variants",
                 "plant_ages", "occ", "cells_b", "padded_key", "counts",
                 "targets", "appearance", "episode_cap", "rules", "streams",
                 "width", "height", "was_night", "short")

    def __init__(self):
        self.step_count = 0
        self.creatures = []
        self.plant_ages = {}
        self.occ = {}
        self.counts = {"cow": 0, "zombie": 0, "skeleton": 0}
        self.was_night = False

    @property
    def daylight(self) -> float:
        return (self.step_count % self.rules.world["day_length"]) / self.rules.world["day_length"]

    def is_night(self) -> bool:
        return self.daylight >= self.rules.world["night_start"]

    def cell(self, x, y) -> int:
        return self.cells_b[y * self.width + x]

    def set_cell(self, x, y, material, variant=1):
        """Rewrite one cell; placing or clearing always resets the variant.

        padded_key is a 4-cell-padded (material * 5 + variant) grid the
        renderer slices directly, so it must track every mutation here.
        """
        self.map.cells[y, x] = material
        self.cells_b[y * self.width + x] = material
        self.variants[y, x] = variant
        self.padded_key[y + 4, x + 4] = material * 5 + variant

    def set_variant(self, x, y, variant):
        self.variants[y, x] = variant
        self.padded_key[y + 4, x + 4] = self.cells_b[y * self.width + x] * 5 + variant


def init_state(world: WorldMap, entities, seed, appearance, targets,
               rules, episode_cap=10000) -> WorldState:
    """Assemble a stepping-ready state from generated terrain.

    Assigns appearance variants to every varied cell and creature using
    dedicated streams, so the draw sequence is independent of later play.
    """
    s = WorldState()
    s.map = world
    s.width, s.height = world.width, world.height
    s.rules = rules
    s.episode_cap = episode_cap
    s.appearance = appearance
    s.targets = dict(targets)
    s.player = PlayerState(*world.spawn)
    s.cells_b = bytearray(world.cells.tobytes())
    s.streams = {name: Stream(fold(seed, "sim"), name)
                 for name in ("creatures", "spawn", "variants", "player")}

    s.variants = np.ones((s.height, s.width), dtype=np.uint8)
    vstream = s.streams["variants"]
    for mat, klass in sorted(_MATERIAL_TO_CLASS.items()):
        flat = np.flatnonzero(world.cells.ravel() == mat)
        if len(flat):
            draws = vstream.uniform_array(len(flat))
            cum = np.cumsum(appearance[klass])
            s.variants.ravel()[flat] = np.searchsorted(cum, draws, side="right") + 1

    s.padded_key = np.zeros((s.height + 8, s.width + 8), dtype=np.uint8)
    s.padded_key[4:-4, 4:-4] = world.cells * np.uint8(5) + s.variants

    hp = rules.combat["creature_health"]
    for kind_name, x, y in entities:
        kind = KIND_CODES[kind_name]
        variant = sample_variant(kind_name, appearance, vstream)
        c = Creature(kind, x, y, hp[kind_name], variant)
        s.creatures.append(c)
        s.occ[(x, y)] = c
        s.counts[kind_name] += 1
    # classes the spawner still owes creatures; updated on kill/spawn so
    # the per-step spawn check is one truthiness test
    s.short = {k for k in s.counts
               if s.counts[k] < s.targets.get(k, 0.0)}
    return s


def is_terminal(state: WorldState) -> bool:
    return state.player.health <= 0 or state.step_count >= state.episode_cap


def _best_damage(player, combat) -> int:
    inv = player.inventory
    for sword in _SWORD_TIERS:
        if inv[sword] > 0:
            return combat["attack_damage"][sword]
    return combat["attack_damage"]["none"]


def _nearby(state, materials, radius=1) -> bool:
    px, py = state.player.x, state.player.y
    for y in range(max(0, py - radius), min(state.height, py + radius + 1)):
        base = y * state.width
        for x in range(max(0, px - radius), min(state.width, px + radius + 1)):
            if state.cells_b[base + x] in materials:
                return True
    return False


def _facing_cell(state):
    dx, dy = OFFSETS[state.player.facing]
    tx, ty = state.player.x + dx, state.player.y + dy
    if 0 <= tx < state.width and 0 <= ty < state.height:
        return tx, ty
    return None


def _gain(player, item, n):
    player.inventory[item] = min(MAX_VITAL, player.inventory[item] + n)


def _kill_creature(state, c):
    state.creatures.remove(c)
    state.occ.pop((c.x, c.y), None)
    if c.kind in _CREATURE_CLASS:
        klass = _CREATURE_CLASS[c.kind]
        state.counts[klass] -= 1
        if state.counts[klass] < state.targets.get(klass, 0.0):
            state.short.add(klass)


def _apply_do(state, events):
    target = _facing_cell(state)
    if target is None:
        return
    tx, ty = target
    c = state.occ.get(target)
    combat = state.rules.combat
    if c is not None:
        if c.kind == ARROW:
            _kill_creature(state, c)
            return
        c.hp -= _best_damage(state.player, combat)
        if c.hp <= 0:
            _kill_creature(state, c)
            if c.kind == COW:
                vit = state.rules.vitals
                state.player.food = min(MAX_VITAL, state.player.food + vit["eat_cow_food"])
                events.achievements.add("eat_cow")
            elif c.kind == ZOMBIE:
                events.achievements.add("defeat_zombie")
            elif c.kind == SKELETON:
                events.achievements.add("defeat_skeleton")
        return
    mat = state.cell(tx, ty)
    if mat == Material.PLANT:
        if state.variants[ty, tx] == PLANT_RIPE:
            state.player.food = min(MAX_VITAL, state.player.food
                                    + state.rules.vitals["eat_plant_food"])
            events.achievements.add("eat_plant")
            state.set_cell(tx, ty, Material.GRASS)
            state.plant_ages.pop((tx, ty), None)
        return
    rule = state.rules.collect.get(Material(mat))
    if rule is None:
        return
    tool = rule["tool"]
    if tool is not None and state.player.inventory[tool] <= 0:
        return
    if rule["probability"] < 1.0 and not state.streams["player"].chance(rule["probability"]):
        return
    for item, n in rule["yields"].items():
        _gain(state.player, item, n)
    if rule["vital"]:
        v = rule["vital"]
        setattr(state.player, v, min(MAX_VITAL, getattr(state.player, v) + 1))
    if rule["leaves"] != mat:
        state.set_cell(tx, ty, rule["leaves"])
    events.achievements.add(rule["achievement"])


def _apply_place(state, name, events):
    rule = state.rules.place[name]
    target = _facing_cell(state)
    if target is None:
        return
    tx, ty = target
    if state.cell(tx, ty) not in rule["on"] or target in state.occ:
        return
    inv = state.player.inventory
    if any(inv[item] < n for item, n in rule["costs"].items()):
        return
    for item, n in rule["costs"].items():
        inv[item] -= n
    puts = rule["puts"]
    if puts == Material.PLANT:
        state.plant_ages[target] = 0
        state.set_cell(tx, ty, puts, PLANT_YOUNG)
    elif puts == Material.STONE:
        state.set_cell(tx, ty, puts, sample_variant("stone", state.appearance,
                                                    state.streams["variants"]))
    else:
        state.set_cell(tx, ty, puts)
    events.achievements.add(rule["achievement"])


def _apply_make(state, name, events):
    rule = state.rules.make[name]
    inv = state.player.inventory
    if any(inv[item] < n for item, n in rule["costs"].items()):
        return
    if not all(_nearby(state, (m,)) for m in rule["nearby"]):
        return
    for item, n in rule["costs"].items():
        inv[item] -= n
    _gain(state.player, name[len("make_"):], 1)
    events.achievements.add(rule["achievement"])


def _apply_move(state, action, events):
    p = state.player
    p.facing = _MOVE_FACING[action]
    target = _facing_cell(state)
    if target is None:
        return
    tx, ty = target
    mat = state.cell(tx, ty)
    if not _PLAYER_WALK[mat] or target in state.occ:
        return
    p.x, p.y = tx, ty
    if mat == Material.LAVA:
        p.health = 0


def _player_phase(state, action, events):
    p = state.player
    if p.sleeping:
        return  # actions are ignored until the player wakes
    if action == Action.DO:
        _apply_do(state, events)
    elif action in _MOVE_FACING:
        _apply_move(state, action, events)
    elif action == Action.SLEEP:
        p.sleeping = True
    elif action in (Action.PLACE_STONE, Action.PLACE_TABLE,
                    Action.PLACE_FURNACE, Action.PLACE_PLANT):
        _apply_place(state, "place_" + action.name[len("PLACE_"):].lower(), events)
    elif action != Action.NOOP:
        _apply_make(state, action.name.lower(), events)


def _plants_phase(state):
    if not state.plant_ages:
        return
    ripe_age = state.rules.vitals["plant_ripe_age"]
    for pos, age in state.plant_ages.items():
        state.plant_ages[pos] = age + 1
        if age + 1 == ripe_age:
            state.set_variant(pos[0], pos[1], PLANT_RIPE)


def _try_move_creature(state, c, nx, ny) -> bool:
    if not (0 <= nx < state.width and 0 <= ny < state.height):
        return False
    if not _CREATURE_WALK[state.cells_b[ny * state.width + nx]]:
        return False
    if c.kind == SKELETON and state.cells_b[ny * state.width + nx] != Material.PATH:
        return False
    if (nx, ny) in state.occ or (nx, ny) == (state.player.x, state.player.y):
        return False
    del state.occ[(c.x, c.y)]
    c.x, c.y = nx, ny
    state.occ[(nx, ny)] = c
    return True


def _hurt_player(state, dmg, events):
    p = state.player
    if p.sleeping:
        p.sleeping = False  # pain interrupts sleep, no morning bonus
    p.health = max(0, p.health - dmg)


def _creature_phase(state, events):
    """Arrows fly first (no randomness), then every active creature takes
    exactly one uniform draw from a batched array; a mover reuses its own
    gate draw for the direction (u | u < p is uniform on [0, p)).
    """
    p = state.player
    px, py = p.x, p.y
    occ = state.occ
    combat = state.rules.combat
    arrow_dmg = combat["arrow_damage"]
    dead = []
    actives = []
    for c in state.creatures:
        kind = c.kind
        if kind == ARROW:
            nx, ny = c.x + c.dx, c.y + c.dy
            if nx == px and ny == py:
                _hurt_player(state, arrow_dmg, events)
                dead.append(c)
                continue
            hit = occ.get((nx, ny))
            if hit is not None:
                hit.hp -= arrow_dmg
                if hit.hp <= 0:
                    dead.append(hit)
                dead.append(c)
                continue
            if (not (0 <= nx < state.width and 0 <= ny < state.height)
                    or not _CREATURE_WALK[state.cells_b[ny * state.width + nx]]):
                dead.append(c)
                continue
            del occ[(c.x, c.y)]
            c.x, c.y = nx, ny
            occ[(nx, ny)] = c
            continue
        adx = c.x - px
        if adx > ACTIVE_RADIUS or adx < -ACTIVE_RADIUS:
            continue
        ady = c.y - py
        if ady > ACTIVE_RADIUS or ady < -ACTIVE_RADIUS:
            continue
        actives.append(c)
    if actives:
        draws = state.streams["creatures"].uniforms(len(actives))
        cr = state.rules.creatures
        night = state.is_night()
        chase_r = cr["zombie_chase_radius_night"] if night else cr["zombie_chase_radius_day"]
        move_p = cr["zombie_move_prob_night"] if night else cr["zombie_move_prob_day"]
        cow_p = cr["cow_move_prob"]
        srange = combat["skeleton_range"]
        for i, c in enumerate(actives):
            if c.hp <= 0:  # shot by an arrow this very tick
                continue
            if c.cd > 0:
                c.cd -= 1
            u = draws[i]
            kind = c.kind
            if kind == COW:
                if u < cow_p:
                    d = int(u * (4.0 / cow_p))
                    dx, dy = OFFSETS[d if d < 4 else 3]
                    _try_move_creature(state, c, c.x + dx, c.y + dy)
                continue
            adx = c.x - px
            ady = c.y - py
            aax = adx if adx >= 0 else -adx
            aay = ady if ady >= 0 else -ady
            if kind == ZOMBIE:
                if aax + aay == 1:  # axis-adjacent: bite instead of moving
                    if c.cd == 0:
                        dmg = combat["zombie_damage_sleeping"] if p.sleeping \
                            else combat["zombie_damage"]
                        _hurt_player(state, dmg, events)
                        c.cd = combat["zombie_attack_cooldown"]
                    continue
                if u >= move_p:
                    continue
                if (aax if aax > aay else aay) <= chase_r:
                    # step along the dominant axis toward the player
                    sx = -1 if adx > 0 else (1 if adx < 0 else 0)
                    sy = -1 if ady > 0 else (1 if ady < 0 else 0)
                    if aax >= aay and sx and _try_move_creature(state, c, c.x + sx, c.y):
                        continue
                    if sy and _try_move_creature(state, c, c.x, c.y + sy):
                        continue
                    if aax < aay and sx:
                        _try_move_creature(state, c, c.x + sx, c.y)
                else:
                    d = int(u * (4.0 / move_p))
                    dx, dy = OFFSETS[d if d < 4 else 3]
                    _try_move_creature(state, c, c.x + dx, c.y + dy)
            else:  # skeleton
                aligned = (adx == 0 and 0 < aay <= srange) or \
                          (ady == 0 and 0 < aax <= srange)
                if aligned and c.cd == 0 and _line_clear(state, c, p):
                    sx = 0 if adx == 0 else (-1 if adx > 0 else 1)
                    sy = 0 if ady == 0 else (-1 if ady > 0 else 1)
                    ax, ay = c.x + sx, c.y + sy
                    if ax == px and ay == py:
                        _hurt_player(state, arrow_dmg, events)
                        c.cd = combat["skeleton_shoot_cooldown"]
                    elif (ax, ay) not in occ and \
                            _CREATURE_WALK[state.cells_b[ay * state.width + ax]]:
                        arrow = Creature(ARROW, ax, ay, 1, 1, sx, sy)
                        state.creatures.append(arrow)
                        occ[(ax, ay)] = arrow
                        c.cd = combat["skeleton_shoot_cooldown"]
                elif u < 0.2:
                    d = int(u * 20.0)
                    dx, dy = OFFSETS[d if d < 4 else 3]
                    _try_move_creature(state, c, c.x + dx, c.y + dy)
    for c in dead:
        if c in state.creatures:
            _kill_creature(state, c)
    _spawn_phase(state)


def _line_clear(state, c, p) -> bool:
    sx = 0 if p.x == c.x else (1 if p.x > c.x else -1)
    sy = 0 if p.y == c.y else (1 if p.y > c.y else -1)
    x, y = c.x + sx, c.y + sy
    while (x, y) != (p.x, p.y):
        if not _CREATURE_WALK[state.cells_b[y * state.width + x]] or (x, y) in state.occ:
            return False
        x, y = x + sx, y + sy
    return True


def _spawn_phase(state):
    if not state.short:
        return
    rate = state.rules.creatures["spawn_prob_per_deficit"]
    if rate <= 0:
        return
    rng = state.streams["spawn"]
    hp = state.rules.combat["creature_health"]
    p = state.player
    for klass in ("cow", "zombie", "skeleton"):
        if klass not in state.short:
            continue
        deficit = state.targets.get(klass, 0.0) - state.counts[klass]
        if rng.uniform() >= min(1.0, rate * deficit):
            continue
        zone = state.map.spawn_zones[klass]
        if not len(zone):
            continue
        want_mat = Material.PATH if klass == "skeleton" else Material.GRASS
        for _ in range(4):  # a few tries, else wait for the next step
            i = rng.randint(len(zone))
            x, y = int(zone[i, 0]), int(zone[i, 1])
            if (x, y) in state.occ or state.cells_b[y * state.width + x] != want_mat:
                continue
            if max(abs(x - p.x), abs(y - p.y)) < 7:
                continue  # never spawn inside or near the view window
            variant = sample_variant(klass, state.appearance, state.streams["variants"])
            c = Creature(KIND_CODES[klass], x, y, hp[klass], variant)
            state.creatures.append(c)
            state.occ[(x, y)] = c
            state.counts[klass] += 1
            if state.counts[klass] >= state.targets.get(klass, 0.0):
                state.short.discard(klass)
            break


def _vitals_phase(state):
    p = state.player
    vit = state.rules.vitals
    slow = vit["sleep_slowdown"] if p.sleeping else 1
    p.hunger += 1
    if p.hunger >= vit["food_interval"] * slow:
        p.hunger = 0
        p.food = max(0, p.food - 1)
    p.thirst += 1
    if p.thirst >= vit["water_interval"] * slow:
        p.thirst = 0
        p.water = max(0, p.water - 1)
    if p.sleeping:
        if state.is_night() and p.energy < MAX_VITAL:
            p.energy = min(MAX_VITAL, p.energy + vit["sleep_energy_gain"])
    else:
        p.fatigue += 1
        if p.fatigue >= vit["energy_interval"]:
            p.fatigue = 0
            p.energy = max(0, p.energy - 1)
    depleted = (p.food == 0) + (p.water == 0) + (p.energy == 0)
    if depleted:
        p.starve += depleted
        while p.starve >= vit["starve_interval"]:
            p.starve -= vit["starve_interval"]
            p.health = max(0, p.health - 1)
    elif p.health < MAX_VITAL and p.health > 0:
        p.regen += 1
        if p.regen >= vit["regen_interval"]:
            p.regen = 0
            p.health += 1
    else:
        p.regen = 0


def step(state: WorldState, action) -> StepEvents:
    """Advance the world one tick in place; returns the step's events."""
    if is_terminal(state):
        raise ContractError("step() on a terminal state")
    try:
        action = _ACTION_OF[action]
    except (KeyError, TypeError):
        action = Action(action)  # raises the usual ValueError
    events = StepEvents()
    health_before = state.player.health
    _player_phase(state, action, events)
    _plants_phase(state)
    if state.player.health > 0:
        _creature_phase(state, events)
    _vitals_phase(state)
    state.step_count += 1
    night_now = state.is_night()
    if state.was_night and not night_now and state.player.sleeping:
        state.player.sleeping = False
        events.achievements.add("wake_up")
    state.was_night = night_now
    events.health_delta = state.player.health - health_before
    events.died = state.player.health <= 0
    return events


def can_apply(state: WorldState, action):
    """Whether the action would change state beyond the clock, and why not."""
    action = Action(action)
    p = state.player
    if p.sleeping:
        return False, "sleeping"
    if action == Action.NOOP:
        return False, "no-op"
    if action in _MOVE_FACING:
        if p.facing != _MOVE_FACING[action]:
            return True, ""
        target = _facing_cell(state)
        if target is None:
            return False, "world edge"
        if target in state.occ:
            return False, "cell occupied"
        mat = state.cell(*target)
        if not _PLAYER_WALK[mat]:
            return False, f"blocked by {Material(mat).name.lower()}"
        return True, ""
    if action == Action.SLEEP:
        return True, ""
    if action == Action.DO:
        target = _facing_cell(state)
        if target is None:
            return False, "world edge"
        if target in state.occ:
            return True, ""
        mat = state.cell(*target)
        if mat == Material.PLANT:
            if state.variants[target[1], target[0]] == PLANT_RIPE:
                return True, ""
            return False, "plant not grown"
        rule = state.rules.collect.get(Material(mat))
        if rule is None:
            return False, "nothing to collect"
        tool = rule["tool"]
        if tool is not None and p.inventory[tool] <= 0:
            return False, f"needs {tool}"
        return True, ""
    if action in (Action.PLACE_STONE, Action.PLACE_TABLE,
                  Action.PLACE_FURNACE, Action.PLACE_PLANT):
        rule = state.rules.place["place_" + action.name[len("PLACE_"):].lower()]
        target = _facing_cell(state)
        if target is None:
            return False, "world edge"
        if target in state.occ:
            return False, "cell occupied"
        if state.cell(*target) not in rule["on"]:
            return False, f"cannot place on {Material(state.cell(*target)).name.lower()}"
        for item, n in rule["costs"].items():
            if p.inventory[item] < n:
                return False, f"insufficient {item}"
        return True, ""
    rule = state.rules.make[action.name.lower()]
    for item, n in rule["costs"].items():
        if p.inventory[item] < n:
            return False, f"insufficient {item}"
    for mat in rule["nearby"]:
        if not _nearby(state, (mat,)):
            return False, f"needs nearby {mat.name.lower()}"
    return True, ""


def state_digest(state: WorldState) -> bytes:
    """Order-stable fingerprint of the full simulation state, for replay tests."""
    import hashlib
    h = hashlib.sha256()
    h.update(bytes(state.cells_b))
    h.update(state.variants.tobytes())
    p = state.player
    h.update(repr((p.x, p.y, p.facing, p.health, p.food, p.water, p.energy,
                   sorted(p.inventory.items()), p.sleeping, p.hunger, p.thirst,
                   p.fatigue, p.starve, p.regen)).encode())
    h.update(repr([(c.kind, c.x, c.y, c.hp, c.variant, c.cd, c.dx, c.dy)
                   for c in state.creatures]).encode())
    h.update(repr(sorted(state.plant_ages.items())).encode())
    h.update(state.step_count.to_bytes(8, "little"))
    return h.digest()
