"""Procedural 7x7 tile art: materials, creatures, player, inventory glyphs.

Tiles are generated from fixed integer-hash patterns, never from episode
seeds, so every world renders with the identical atlas. Variants 2..4 of
the varied object classes are tinted recolors of the base tile; variant 1
is the base look.
"""

from __future__ import annotations

import numpy as np

from .rng import hash_grid
from .worldgen import Material

TILE = 7

# classes whose four variants differ visually
VARIED_MATERIALS = {Material.TREE, Material.STONE, Material.COAL}

# blend weights toward a marker hue for variants 2..4
_TINTS = {
    2: (205, 70, 70),
    3: (70, 95, 215),
    4: (215, 190, 60),
}


def _speckle(key, amplitude):
    ys, xs = np.mgrid[0:TILE, 0:TILE]
    h = hash_grid(key, xs, ys)
    return ((h >> np.uint64(40)).astype(np.int16) % (2 * amplitude + 1)) - amplitude


def _base(color, key=1, amplitude=10):
    tile = np.zeros((TILE, TILE, 3), dtype=np.int16)
    tile[:] = color
    tile += _speckle(key, amplitude)[:, :, None]
    return tile


def _clip(tile):
    return np.clip(tile, 0, 255).astype(np.uint8)


def tint(tile: np.ndarray, variant: int) -> np.ndarray:
    """Recolor toward the variant's marker hue; variant 1 is unchanged."""
    if variant == 1:
        return tile.copy()
    hue = np.array(_TINTS[variant], dtype=np.float64)
    out = tile.astype(np.float64) * 0.5 + hue * 0.5
    return _clip(out)


def _material_tile(mat: Material) -> np.ndarray:
    m = Material
    if mat == m.WATER:
        t = _base((40, 70, 180), key=11, amplitude=14)
    elif mat == m.SAND:
        t = _base((210, 190, 120), key=12)
    elif mat == m.GRASS:
        t = _base((70, 140, 60), key=13, amplitude=12)
    elif mat == m.TREE:
        t = _base((60, 120, 50), key=13, amplitude=8)
        t[1:5, 1:6] = (30, 85, 30)   # canopy
        t[2:4, 2:5] = (20, 100, 25)
        t[5:7, 3:4] = (95, 60, 25)   # trunk
    elif mat == m.PATH:
        t = _base((140, 120, 95), key=14)
    elif mat == m.STONE:
        t = _base((125, 125, 130), key=15, amplitude=16)
        t[3, :] -= 25
        t[:, 4] -= 20
    elif mat == m.COAL:
        t = _base((125, 125, 130), key=15, amplitude=10)
        for x, y in ((1, 2), (4, 1), (2, 5), (5, 4)):
            t[y:y + 2, x:x + 2] = (25, 25, 28)
    elif mat == m.IRON:
        t = _base((125, 125, 130), key=15, amplitude=10)
        for x, y in ((1, 1), (4, 3), (2, 5)):
            t[y, x:x + 2] = (215, 180, 160)
    elif mat == m.DIAMOND:
        t = _base((125, 125, 130), key=15, amplitude=10)
        for x, y in ((2, 2), (4, 4)):
            t[y, x] = (120, 230, 235)
            t[y + 1, x] = (80, 200, 220)
    elif mat == m.LAVA:
        t = _base((215, 80, 20), key=16, amplitude=24)
        t[:, :, 0] = np.clip(t[:, :, 0] + 30, 0, 255)
    elif mat == m.TABLE:
        t = _base((150, 105, 55), key=17, amplitude=6)
        t[0, :] = (170, 125, 70)
        t[2:7, 1] = (100, 65, 30)
        t[2:7, 5] = (100, 65, 30)
    elif mat == m.FURNACE:
        t = _base((105, 105, 110), key=18, amplitude=8)
        t[3:6, 2:5] = (40, 35, 35)
        t[4:6, 3] = (230, 120, 30)
    elif mat == m.PLANT:
        t = _base((70, 140, 60), key=13, amplitude=12)
        t[3:6, 3] = (40, 170, 60)
        t[3, 2] = (50, 180, 70)
        t[4, 4] = (50, 180, 70)
    else:
        t = np.zeros((TILE, TILE, 3), dtype=np.int16)
    return _clip(t)


def _ripe_plant_tile() -> np.ndarray:
    t = _material_tile(Material.PLANT).astype(np.int16)
    for x, y in ((2, 3), (4, 2), (3, 5)):
        t[y, x] = (225, 50, 50)
    return _clip(t)


def _creature_art(kind: str):
    """Tile plus foreground mask; background stays the cell underneath."""
    t = np.zeros((TILE, TILE, 3), dtype=np.int16)
    mask = np.zeros((TILE, TILE), dtype=bool)

    def blob(ys, xs, color):
        t[ys, xs] = color
        mask[ys, xs] = True

    if kind == "cow":
        blob(slice(2, 6), slice(1, 6), (235, 235, 230))
        blob(slice(3, 5), slice(1, 3), (90, 60, 40))
        blob(slice(2, 3), slice(5, 6), (240, 200, 200))
    elif kind == "zombie":
        blob(slice(1, 3), slice(2, 5), (90, 160, 80))
        blob(slice(3, 6), slice(2, 5), (60, 120, 60))
        blob(slice(6, 7), slice(2, 3), (50, 100, 50))
        blob(slice(6, 7), slice(4, 5), (50, 100, 50))
        t[1, 2] = t[1, 4] = (200, 40, 40)
    elif kind == "skeleton":
        blob(slice(1, 3), slice(2, 5), (225, 225, 215))
        blob(slice(3, 6), slice(3, 4), (205, 205, 195))
        blob(slice(3, 4), slice(1, 6), (205, 205, 195))
        blob(slice(6, 7), slice(2, 3), (190, 190, 180))
        blob(slice(6, 7), slice(4, 5), (190, 190, 180))
        t[1, 2] = t[1, 4] = (30, 30, 30)
    return _clip(t), mask


def _arrow_art(horizontal: bool):
    t = np.zeros((TILE, TILE, 3), dtype=np.int16)
    mask = np.zeros((TILE, TILE), dtype=bool)
    if horizontal:
        t[3, 1:6] = (200, 200, 205)
        mask[3, 1:6] = True
    else:
        t[1:6, 3] = (200, 200, 205)
        mask[1:6, 3] = True
    return _clip(t), mask


def _player_art(facing: int):
    t = np.zeros((TILE, TILE, 3), dtype=np.int16)
    mask = np.zeros((TILE, TILE), dtype=bool)
    t[1:6, 2:5] = (200, 160, 120)
    mask[1:6, 2:5] = True
    t[6, 2] = t[6, 4] = (70, 50, 90)
    mask[6, 2] = mask[6, 4] = True
    eyes = (25, 25, 35)
    if facing == 0:      # up
        t[1, 2] = t[1, 4] = eyes
    elif facing == 1:    # down
        t[2, 2] = t[2, 4] = eyes
    elif facing == 2:    # left
        t[2, 2] = t[3, 2] = eyes
    else:                # right
        t[2, 4] = t[3, 4] = eyes
    return _clip(t), mask


# inventory strip geometry
STRIP_H = 9
SLOT_W = 4
SLOT_ORDER = (
    "health", "food", "water", "energy",
    "wood", "stone", "coal", "iron", "diamond", "sapling",
    "wood_pickaxe", "stone_pickaxe", "iron_pickaxe",
    "wood_sword", "stone_sword", "iron_sword",
)
_STRIP_BG = (16, 16, 16)
_TICK = (255, 255, 255)

_SLOT_COLORS = {
    "health": (220, 60, 60), "food": (200, 130, 60), "water": (70, 110, 220),
    "energy": (230, 220, 70), "wood": (150, 105, 55), "stone": (130, 130, 135),
    "coal": (40, 40, 45), "iron": (215, 180, 160), "diamond": (110, 225, 230),
    "sapling": (80, 190, 90), "wood_pickaxe": (170, 120, 60),
    "stone_pickaxe": (160, 160, 165), "iron_pickaxe": (230, 200, 180),
    "wood_sword": (190, 140, 80), "stone_sword": (185, 185, 190),
    "iron_sword": (245, 215, 195),
}


def _slot_tile(name: str, count: int) -> np.ndarray:
    t = np.zeros((STRIP_H, SLOT_W, 3), dtype=np.uint8)
    t[:] = _STRIP_BG
    color = _SLOT_COLORS[name]
    t[1:4, 1:3] = color
    if name.endswith("_pickaxe"):
        t[1, 0] = t[1, 3] = color
    elif name.endswith("_sword"):
        t[0, 1] = color
    elif name in ("health", "water"):
        t[0, 1:3] = color
    for i in range(min(count, 9)):
        t[6 + i // 3, i % 3] = _TICK
    return t


def build_strip_atlas() -> np.ndarray:
    """(slot, count) -> 9x4 tile; gathered per frame by the renderer."""
    atlas = np.zeros((len(SLOT_ORDER), 10, STRIP_H, SLOT_W, 3), dtype=np.uint8)
    for s, name in enumerate(SLOT_ORDER):
        for count in range(10):
            atlas[s, count] = _slot_tile(name, count)
    return atlas


class Atlas:
    """All render lookups: material LUT, creature/player overlays, strip."""

    def __init__(self):
        n_mat = max(Material) + 1
        self.lut = np.zeros((n_mat, 5), dtype=np.uint16)
        tiles = [np.zeros((TILE, TILE, 3), dtype=np.uint8)]  # id 0 = darkness
        for mat in Material:
            base = _material_tile(mat)
            for variant in (1, 2, 3, 4):
                if mat == Material.PLANT and variant == 2:
                    tile = _ripe_plant_tile()
                elif mat in VARIED_MATERIALS:
                    tile = tint(base, variant)
                else:
                    tile = base.copy()
                self.lut[mat, variant] = len(tiles)
                tiles.append(tile)
            self.lut[mat, 0] = self.lut[mat, 1]
        self.tiles = np.stack(tiles)
        self.creatures = {}
        for code, kind in enumerate(("cow", "zombie", "skeleton")):
            tile, mask = _creature_art(kind)
            for variant in (1, 2, 3, 4):
                self.creatures[(code, variant)] = (tint(tile, variant) if variant > 1
                                                   else tile, mask)
        h_tile, h_mask = _arrow_art(True)
        v_tile, v_mask = _arrow_art(False)
        for variant in (1, 2, 3, 4):
            self.creatures[(3, variant)] = (h_tile, h_mask)
        self.arrow_h = (h_tile, h_mask)
        self.arrow_v = (v_tile, v_mask)
        self.player = {f: _player_art(f) for f in range(4)}
        self.strip = build_strip_atlas()

    def tile(self, name: str, variant: int = 1, shade: float = 1.0) -> np.ndarray:
        """Lookup by material or creature name, optionally darkened."""
        kind_codes = {"cow": 0, "zombie": 1, "skeleton": 2, "arrow": 3}
        if name in kind_codes:
            t = self.creatures[(kind_codes[name], variant)][0]
        else:
            t = self.tiles[self.lut[Material[name.upper()], variant]]
        if shade >= 1.0:
            return t.copy()
        return (t.astype(np.uint16) * int(shade * 256) >> 8).astype(np.uint8)


_ATLAS = None


def get_atlas() -> Atlas:
    global _ATLAS
    if _ATLAS is None:
        _ATLAS = Atlas()
    return _ATLAS
