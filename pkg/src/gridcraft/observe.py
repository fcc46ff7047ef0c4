"""Renders world state into the fixed 64x64x3 observation.

Layout: a 9-wide by 7-tall cell window centered on the player, drawn with
7px tiles into the top 55 rows (1px right margin, 3px top/bottom margins),
then a 9px inventory strip. Out-of-world cells render as darkness. The
whole map region is darkened at night.

Hot path: the simulator keeps a padded (material * 5 + variant) key grid,
so a frame is two flat gathers (keys -> tile ids -> pixel rows) plus one
fixed permutation into scanline order, all into preallocated buffers. The
scratch buffers make render non-reentrant, which is fine because each
worker process steps its lanes sequentially; the returned array is always
fresh and never aliases them.
"""

from __future__ import annotations

import numpy as np

from .textures import SLOT_ORDER, STRIP_H, TILE, get_atlas

OBS = 64
VIEW_W, VIEW_H = 9, 7       # cells
VIEW_DX, VIEW_DY = 4, 3     # window half-extents
MAP_X0, MAP_Y0 = 0, 3       # pixel origin of the map region
MAP_PIX_W, MAP_PIX_H = VIEW_W * TILE, VIEW_H * TILE
STRIP_Y0 = OBS - STRIP_H
N_SLOTS = len(SLOT_ORDER)

_TICK_ROWS = (STRIP_Y0 + 6, STRIP_Y0 + 7, STRIP_Y0 + 8)


def brightness(phase: float) -> float:
    """Ambient light over the day cycle; night bottoms out at 0.45."""
    if phase < 0.45:
        return 1.0
    if phase < 0.55:
        return 1.0 - 0.55 * (phase - 0.45) / 0.10
    if phase < 0.90:
        return 0.45
    return 0.45 + 0.55 * (phase - 0.90) / 0.10


def _flat_art(art):
    tile, mask = art
    return tile.reshape(-1), np.repeat(mask.reshape(-1), 3)


class _Renderer:
    """Atlas views flattened for gathers, plus reusable per-frame buffers."""

    def __init__(self):
        atlas = get_atlas()
        self.atlas = atlas
        self.lut_flat = np.ascontiguousarray(atlas.lut.reshape(-1))
        self.tiles_flat = np.ascontiguousarray(
            atlas.tiles.reshape(len(atlas.tiles), -1))
        self.strip_flat = np.ascontiguousarray(
            atlas.strip.reshape(N_SLOTS * 10, -1))
        self.creature_flat = {k: _flat_art(v) for k, v in atlas.creatures.items()}
        self.player_flat = {k: _flat_art(v) for k, v in atlas.player.items()}
        self.arrow_flat = (_flat_art(atlas.arrow_v), _flat_art(atlas.arrow_h))
        n_cells = VIEW_H * VIEW_W
        self.scratch = np.empty((n_cells, TILE * TILE * 3), np.uint8)
        self.shade16 = np.empty_like(self.scratch, dtype=np.uint16)
        self.map_buf = np.empty((MAP_PIX_H, MAP_PIX_W, 3), np.uint8)
        # same bytes viewed (cell row, px row, cell col, px bytes) / scratch
        # transposed: one strided copy turns cell rows into scanlines
        self.map_dst = self.map_buf.reshape(VIEW_H, TILE, VIEW_W, TILE * 3)
        self.map_src = self.scratch.reshape(
            VIEW_H, VIEW_W, TILE, TILE * 3).transpose(0, 2, 1, 3)
        self.strip_buf = np.empty((N_SLOTS, STRIP_H * 4 * 3), np.uint8)
        self.strip_key = np.empty(N_SLOTS, np.intp)
        self.strip_cache = np.empty((STRIP_H, OBS, 3), np.uint8)
        self.strip_tag = None


_RD = None


def _renderer() -> _Renderer:
    global _RD
    if _RD is None:
        _RD = _Renderer()
    return _RD


def render(state, spec) -> np.ndarray:
    """Pure function of (state, spec) to observation pixels."""
    rd = _renderer()
    p = state.player
    px, py = p.x, p.y
    key_win = state.padded_key[py + 4 - VIEW_DY:py + 4 + VIEW_DY + 1,
                               px:px + VIEW_W]
    ids = rd.lut_flat[key_win.ravel()]
    scratch = rd.scratch
    np.take(rd.tiles_flat, ids, axis=0, out=scratch, mode="clip")

    for c in state.creatures:
        vx = c.x - px + VIEW_DX
        if 0 <= vx < VIEW_W:
            vy = c.y - py + VIEW_DY
            if 0 <= vy < VIEW_H:
                if c.kind == 3:
                    tf, mf = rd.arrow_flat[1 if c.dx else 0]
                else:
                    tf, mf = rd.creature_flat[(c.kind, c.variant)]
                row = scratch[vy * VIEW_W + vx]
                row[mf] = tf[mf]
    tf, mf = rd.player_flat[p.facing]
    row = scratch[VIEW_DY * VIEW_W + VIEW_DX]
    row[mf] = tf[mf]

    shade = int(brightness(state.daylight) * 256)
    if shade < 256:
        np.multiply(scratch, shade, out=rd.shade16, casting="unsafe")
        rd.shade16 >>= 8
        scratch[:] = rd.shade16

    np.copyto(rd.map_dst, rd.map_src)
    obs = np.zeros((OBS, OBS, 3), dtype=np.uint8)
    obs[MAP_Y0:MAP_Y0 + MAP_PIX_H, MAP_X0:MAP_X0 + MAP_PIX_W] = rd.map_buf

    if spec.show_inventory:
        # PlayerState builds its inventory dict in SLOT_ORDER[4:] order
        tag = (p.health, p.food, p.water, p.energy) + tuple(p.inventory.values())
        if tag != rd.strip_tag:
            key = rd.strip_key
            for i in range(N_SLOTS):
                key[i] = i * 10 + tag[i]
            np.take(rd.strip_flat, key, axis=0, out=rd.strip_buf)
            rd.strip_cache.reshape(STRIP_H, N_SLOTS, 4, 3)[:] = \
                rd.strip_buf.reshape(N_SLOTS, STRIP_H, 4, 3).transpose(1, 0, 2, 3)
            rd.strip_tag = tag
        obs[STRIP_Y0:] = rd.strip_cache
    return obs


def decode_strip(obs: np.ndarray) -> dict:
    """Read vitals and inventory counts back out of the strip pixels."""
    values = {}
    for s, name in enumerate(SLOT_ORDER):
        count = 0
        for r in _TICK_ROWS:
            for col in range(3):
                if (obs[r, s * 4 + col] == 255).all():
                    count += 1
        values[name] = count
    return values


def _blit(region, vx, vy, tile, mask):
    cell = region[vy * TILE:(vy + 1) * TILE, vx * TILE:(vx + 1) * TILE]
    cell[mask] = tile[mask]


def render_full_map(state) -> np.ndarray:
    """Whole-world debug view at tile resolution (no night shading)."""
    atlas = get_atlas()
    ids = atlas.lut[state.map.cells, state.variants]
    h, w = state.map.cells.shape
    img = atlas.tiles[ids].transpose(0, 2, 1, 3, 4).reshape(h * TILE, w * TILE, 3)
    for c in state.creatures:
        if c.kind == 3:
            tile, mask = atlas.arrow_h if c.dx else atlas.arrow_v
        else:
            tile, mask = atlas.creatures[(c.kind, c.variant)]
        _blit(img, c.x, c.y, tile, mask)
    tile, mask = atlas.player[state.player.facing]
    _blit(img, state.player.x, state.player.y, tile, mask)
    return img
