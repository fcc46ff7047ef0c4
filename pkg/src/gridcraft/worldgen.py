"""Seeded procedural terrain and object placement.

Terrain comes from layered integer-hash value noise split by per-field
quantiles, which guarantees every seed yields enough candidate cells for the
configured object counts. Static resources (trees, coal, iron) are placed by
affinity ranking so their final census matches the rounded targets exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .rng import Stream, fbm, fold, hash_grid


class Material(IntEnum):
    WATER = 1
    SAND = 2
    GRASS = 3
    TREE = 4
    PATH = 5
    STONE = 6
    COAL = 7
    IRON = 8
    DIAMOND = 9
    LAVA = 10
    TABLE = 11
    FURNACE = 12
    PLANT = 13


WALKABLE = (Material.GRASS, Material.SAND, Material.PATH)

# Static materials placed at generation with exact rounded counts.
STATIC_CLASSES = ("tree", "coal", "iron")
# Creatures maintained as expected concurrent populations.
CREATURE_CLASSES = ("cow", "zombie", "skeleton")

DEFAULT_COUNTS = {
    "tree": 189.0,
    "coal": 50.0,
    "iron": 20.0,
    "cow": 26.0,
    "zombie": 15.0,
    "skeleton": 9.5,
}

DEFAULT_NOISE_SCALES = {
    "elevation": 1.0 / 24.0,
    "moisture": 1.0 / 14.0,
    "tunnels": 1.0 / 7.0,
    "ore": 1.0 / 5.0,
}

DEFAULT_FRACTIONS = {
    "water": 0.20,
    "sand": 0.05,
    "grass": 0.45,
    # stone takes the remainder
    "cave": 0.12,  # share of stone carved into tunnels
    "lava": 0.04,  # share of stone turned into lava pockets
}


class GenerationError(Exception):
    """Raised when the requested object counts cannot be honored."""


@dataclass
class GenParams:
    seed: int
    count_targets: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    noise_scales: dict = field(default_factory=lambda: dict(DEFAULT_NOISE_SCALES))
    fractions: dict = field(default_factory=lambda: dict(DEFAULT_FRACTIONS))
    width: int = 64
    height: int = 64

    def __post_init__(self):
        for name, value in self.count_targets.items():
            if value < 0:
                raise ValueError(f"negative count target for {name!r}")
        self.seed = int(self.seed) & ((1 << 64) - 1)


@dataclass
class WorldMap:
    width: int
    height: int
    cells: np.ndarray  # (height, width) uint8 of Material values
    spawn: tuple  # (x, y) player start
    spawn_zones: dict  # class name -> (N, 2) int array of (x, y) candidates

    def tobytes(self) -> bytes:
        parts = [self.cells.tobytes(), bytes([self.spawn[0], self.spawn[1]])]
        for name in sorted(self.spawn_zones):
            parts.append(name.encode())
            parts.append(self.spawn_zones[name].astype(np.int32).tobytes())
        return b"".join(parts)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def count_materials(world: WorldMap) -> dict:
    """Exact census of the grid; only materials actually present appear."""
    counts = np.bincount(world.cells.ravel(), minlength=max(Material) + 1)
    return {Material(i): int(c) for i, c in enumerate(counts) if c > 0 and i in set(Material)}


def _rank_jitter(seed: int, layer: str, h: int, w: int) -> np.ndarray:
    """Tiny unique per-cell perturbation so ranking ties break deterministically."""
    ys, xs = np.mgrid[0:h, 0:w]
    bits = hash_grid(fold(seed, layer), xs, ys)
    return (bits >> np.uint64(11)).astype(np.float64) * (1e-9 / (1 << 53))


def _take_top(mask: np.ndarray, affinity: np.ndarray, n: int, kind: str):
    """Indices of the n best-ranked cells inside mask; error when short."""
    flat = np.flatnonzero(mask.ravel())
    if len(flat) < n:
        raise GenerationError(
            f"count target for {kind!r} needs {n} cells but only {len(flat)} candidates exist"
        )
    order = np.argsort(-affinity.ravel()[flat], kind="stable")
    return flat[order[:n]]


def _flood_depth(walk: np.ndarray, sx: int, sy: int) -> np.ndarray:
    """BFS depth over a boolean mask via frontier dilation, -1 unreached."""
    depth = np.full(walk.shape, -1, dtype=np.int16)
    if not walk[sy, sx]:
        return depth
    frontier = np.zeros_like(walk)
    frontier[sy, sx] = True
    region = frontier.copy()
    d = 0
    depth[sy, sx] = 0
    while True:
        grown = np.zeros_like(walk)
        grown[1:, :] = frontier[:-1, :]
        grown[:-1, :] |= frontier[1:, :]
        grown[:, 1:] |= frontier[:, :-1]
        grown[:, :-1] |= frontier[:, 1:]
        frontier = grown & walk & ~region
        if not frontier.any():
            return depth
        d += 1
        region |= frontier
        depth[frontier] = d


def _bfs_reachable(cells: np.ndarray, start: tuple) -> np.ndarray:
    """Walkable-connected BFS depth from start, -1 where unreachable."""
    walk = np.isin(cells, WALKABLE)
    return _flood_depth(walk, start[0], start[1])


def _largest_component(walk: np.ndarray) -> np.ndarray:
    """Boolean mask of the biggest 4-connected walkable component."""
    h, w = walk.shape
    ys, xs = np.mgrid[0:h, 0:w]
    center_d2 = (xs - (w - 1) / 2.0) ** 2 + (ys - (h - 1) / 2.0) ** 2
    unvisited = walk.copy()
    best = None
    best_size = 0
    total = int(walk.sum())
    while unvisited.any():
        flat = np.flatnonzero(unvisited.ravel())
        start = flat[np.argmin(center_d2.ravel()[flat])]
        sy, sx = divmod(int(start), w)
        depth = _flood_depth(unvisited, sx, sy)
        region = depth >= 0
        size = int(region.sum())
        if size > best_size:
            best, best_size = region, size
        unvisited &= ~region
        if best_size >= total - best_size:  # nothing bigger can remain
            return best
    return best


def _adjacent_to(cells: np.ndarray, region: np.ndarray, material: Material) -> bool:
    """True when any cell of `material` touches the boolean region 4-adjacently."""
    target = cells == material
    shifted = np.zeros_like(region)
    shifted[1:, :] |= region[:-1, :]
    shifted[:-1, :] |= region[1:, :]
    shifted[:, 1:] |= region[:, :-1]
    shifted[:, :-1] |= region[:, 1:]
    return bool((target & shifted).any())


def generate(params: GenParams):
    """Build terrain and initial creature placements for one episode.

    Returns (WorldMap, entities) where entities is a list of (kind, x, y)
    tuples for the initial creature population. Identical params give
    byte-identical output.

    A small fraction of raw terrains cannot satisfy the placement
    invariants (exact counts, reachable tree and water, big enough spawn
    zones); those retry with a derived sub-seed so every seed is total.
    """
    last = None
    for attempt in range(16):
        seed = params.seed if attempt == 0 else fold(params.seed, "retry", attempt)
        try:
            return _generate_attempt(params, seed)
        except GenerationError as e:
            last = e
    raise GenerationError(f"no viable world in 16 attempts: {last}")


def _generate_attempt(params: GenParams, seed: int):
    h, w = params.height, params.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    scales = {**DEFAULT_NOISE_SCALES, **params.noise_scales}
    fracs = {**DEFAULT_FRACTIONS, **params.fractions}
    targets = {**DEFAULT_COUNTS, **params.count_targets}

    elevation = fbm(fold(seed, "elevation"), xs, ys, scales["elevation"], octaves=3)
    moisture = fbm(fold(seed, "moisture"), xs, ys, scales["moisture"], octaves=2)
    tunnels = fbm(fold(seed, "tunnels"), xs, ys, scales["tunnels"], octaves=2)
    ore = fbm(fold(seed, "ore"), xs, ys, scales["ore"], octaves=2)
    elevation += _rank_jitter(seed, "jit.elev", h, w)
    moisture += _rank_jitter(seed, "jit.moist", h, w)

    # Terrain bands by elevation quantile: low -> water, beach -> sand,
    # middle -> grass, high -> stone.
    n = h * w
    order = np.argsort(elevation.ravel(), kind="stable")
    cells = np.empty(n, dtype=np.uint8)
    n_water = int(fracs["water"] * n)
    n_sand = int(fracs["sand"] * n)
    n_grass = int(fracs["grass"] * n)
    cells[order[:n_water]] = Material.WATER
    cells[order[n_water:n_water + n_sand]] = Material.SAND
    cells[order[n_water + n_sand:n_water + n_sand + n_grass]] = Material.GRASS
    cells[order[n_water + n_sand + n_grass:]] = Material.STONE
    cells = cells.reshape(h, w)

    # Carve cave tunnels and lava pockets inside the mountains.
    stone_mask = cells == Material.STONE
    n_stone = int(stone_mask.sum())
    n_cave = int(fracs["cave"] * n_stone)
    n_lava = int(fracs["lava"] * n_stone)
    if n_cave:
        idx = _take_top(stone_mask, np.abs(tunnels), n_cave, "cave")
        cells.ravel()[idx] = Material.PATH
    if n_lava:
        lava_mask = cells == Material.STONE
        idx = _take_top(lava_mask, elevation, n_lava, "lava")
        cells.ravel()[idx] = Material.LAVA

    # Exact static placement: diamond vein first, then coal and iron by ore
    # affinity, then trees on the wettest grass.
    deep = cells == Material.STONE
    if not deep.any():
        raise GenerationError("no stone cells for the diamond vein")
    vein_seed = _take_top(deep, elevation, 1, "diamond")[0]
    vein = [vein_seed]
    vy, vx = divmod(int(vein_seed), w)
    for nx, ny in ((vx + 1, vy), (vx - 1, vy), (vx, vy + 1), (vx, vy - 1)):
        if 0 <= nx < w and 0 <= ny < h and cells[ny, nx] == Material.STONE:
            vein.append(ny * w + nx)
            break
    cells.ravel()[vein] = Material.DIAMOND

    n_coal = round_half_up(targets["coal"])
    n_iron = round_half_up(targets["iron"])
    stone_now = cells == Material.STONE
    if n_coal:
        idx = _take_top(stone_now, ore, n_coal, "coal")
        cells.ravel()[idx] = Material.COAL
    if n_iron:
        idx = _take_top(cells == Material.STONE, -ore, n_iron, "iron")
        cells.ravel()[idx] = Material.IRON

    n_tree = round_half_up(targets["tree"])
    tree_affinity = moisture + 0.35 * fbm(fold(seed, "forest"), xs, ys, 1 / 4.0, octaves=2)
    if n_tree:
        idx = _take_top(cells == Material.GRASS, tree_affinity, n_tree, "tree")
        cells.ravel()[idx] = Material.TREE

    # Player spawn: cell nearest the map center inside the largest walkable
    # component. Trees block movement, so this must run after forestation
    # or the start can end up boxed into a severed pocket.
    walk = np.isin(cells, WALKABLE)
    if not walk.any():
        raise GenerationError("no walkable cells at all")
    wy, wx = np.nonzero(_largest_component(walk))
    d2 = (wx - (w - 1) / 2.0) ** 2 + (wy - (h - 1) / 2.0) ** 2
    pick = int(np.argmin(d2 + _rank_jitter(seed, "jit.spawn", h, w)[wy, wx]))
    spawn = (int(wx[pick]), int(wy[pick]))
    sx, sy = spawn

    # Keep a 3x3 clearing: ring trees move to the next-best grass so the
    # total stays exact.
    ring = np.zeros((h, w), dtype=bool)
    ring[max(0, sy - 1):sy + 2, max(0, sx - 1):sx + 2] = True
    moved = int((ring & (cells == Material.TREE)).sum())
    if moved:
        cells[ring & (cells == Material.TREE)] = Material.GRASS
        regrow = (cells == Material.GRASS) & ~ring
        idx = _take_top(regrow, tree_affinity, moved, "tree")
        cells.ravel()[idx] = Material.TREE

    # Reachability repair: the spawn component must touch a tree and water.
    depth = _bfs_reachable(cells, spawn)
    region = depth >= 0
    if n_tree and not _adjacent_to(cells, region, Material.TREE):
        cand = (cells == Material.GRASS) & region
        cand[sy, sx] = False
        if not cand.any():
            raise GenerationError("tree unreachable and no grass available for repair")
        new_idx = _take_top(cand, tree_affinity, 1, "tree")[0]
        placed = np.flatnonzero(cells.ravel() == Material.TREE)
        worst = placed[np.argmin(tree_affinity.ravel()[placed])]
        cells.ravel()[worst] = Material.GRASS
        cells.ravel()[new_idx] = Material.TREE
        depth = _bfs_reachable(cells, spawn)
        region = depth >= 0
    if not _adjacent_to(cells, region, Material.WATER):
        cand = (cells == Material.GRASS) & region
        cand[sy, sx] = False
        if not cand.any():
            raise GenerationError("water unreachable and no grass available for repair")
        # farthest reachable grass cell: converting it cannot cut the region
        flat = np.flatnonzero(cand.ravel())
        far = flat[np.argmax(depth.ravel()[flat])]
        cells.ravel()[far] = Material.WATER

    # Spawn zones and the initial creature population.
    zone_defs = {"cow": Material.GRASS, "zombie": Material.GRASS, "skeleton": Material.PATH}
    min_dist = {"cow": 3.0, "zombie": 6.0, "skeleton": 6.0}
    spawn_zones = {}
    entities = []
    rank = _rank_jitter(seed, "jit.creatures", h, w)
    occupied = set()
    for kind in CREATURE_CLASSES:
        zone_mask = cells == zone_defs[kind]
        zy, zx = np.nonzero(zone_mask)
        far_enough = ((zx - sx) ** 2 + (zy - sy) ** 2) >= min_dist[kind] ** 2
        zone = np.stack([zx[far_enough], zy[far_enough]], axis=1).astype(np.int32)
        spawn_zones[kind] = zone
        want = round_half_up(targets[kind])
        if want and len(zone) < want * 2:
            raise GenerationError(
                f"count target for {kind!r} needs a spawn zone of at least "
                f"{want * 2} cells but only {len(zone)} qualify"
            )
        order = np.argsort(rank[zone[:, 1], zone[:, 0]], kind="stable")
        placed = 0
        for j in order:
            if placed >= want:
                break
            x, y = int(zone[j, 0]), int(zone[j, 1])
            if (x, y) in occupied:
                continue
            occupied.add((x, y))
            entities.append((kind, x, y))
            placed += 1

    world = WorldMap(width=w, height=h, cells=cells, spawn=spawn, spawn_zones=spawn_zones)
    return world, entities


def worldmap_from_layout(layout, spawn_zones=None):
    """Build a WorldMap from ASCII art; used by tests and crafted scenarios.

    Legend: ~ water, s sand, . grass, T tree, # stone, p path, c coal,
    i iron, d diamond, L lava, t table, f furnace, P player start (grass).
    """
    legend = {
        "~": Material.WATER, "s": Material.SAND, ".": Material.GRASS,
        "T": Material.TREE, "#": Material.STONE, "p": Material.PATH,
        "c": Material.COAL, "i": Material.IRON, "d": Material.DIAMOND,
        "L": Material.LAVA, "t": Material.TABLE, "f": Material.FURNACE,
    }
    rows = [r for r in layout if r]
    h, w = len(rows), len(rows[0])
    cells = np.zeros((h, w), dtype=np.uint8)
    spawn = None
    for y, row in enumerate(rows):
        if len(row) != w:
            raise ValueError("ragged layout")
        for x, ch in enumerate(row):
            if ch == "P":
                spawn = (x, y)
                cells[y, x] = Material.GRASS
            else:
                cells[y, x] = legend[ch]
    if spawn is None:
        raise ValueError("layout needs a P spawn cell")
    zones = spawn_zones or {k: np.zeros((0, 2), dtype=np.int32) for k in CREATURE_CLASSES}
    return WorldMap(width=w, height=h, cells=cells, spawn=spawn, spawn_zones=zones)
