"""Deterministic random streams and integer-hash noise.

Everything the simulator randomizes flows through named SplitMix64 streams so
that episodes replay bit-exactly on any platform. numpy's generators are only
used on the neural-network side, never inside the simulation.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_MIX1_U = np.uint64(_MIX1)
_MIX2_U = np.uint64(_MIX2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_IOTA_GAMMA = np.arange(256, dtype=np.uint64) * np.uint64(_GAMMA)


def _grow_iota():
    global _IOTA_GAMMA
    _IOTA_GAMMA = np.arange(len(_IOTA_GAMMA) * 4, dtype=np.uint64) * np.uint64(_GAMMA)


def _mix_block(key: int, start: int, n: int) -> np.ndarray:
    """SplitMix64 outputs >> 11 for counters start+1 .. start+n, as uint64.

    Array integer ops wrap silently in numpy, which is exactly the 64-bit
    modular arithmetic SplitMix64 wants.
    """
    while n > len(_IOTA_GAMMA):
        _grow_iota()
    base = np.uint64((key + (start + 1) * _GAMMA) & MASK64)
    h = np.add(_IOTA_GAMMA[:n], base, dtype=np.uint64)
    np.bitwise_xor(h, h >> _S30, out=h)
    np.multiply(h, _MIX1_U, out=h)
    np.bitwise_xor(h, h >> _S27, out=h)
    np.multiply(h, _MIX2_U, out=h)
    np.bitwise_xor(h, h >> _S31, out=h)
    np.right_shift(h, _S11, out=h)
    return h


def mix64(x: int) -> int:
    """SplitMix64 finalizer: one well-mixed 64-bit output per input."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def fold(*parts) -> int:
    """Fold integers and strings into a single 64-bit key."""
    h = 0x8A5CD789635D2DFF
    for p in parts:
        if isinstance(p, str):
            for ch in p.encode("utf-8"):
                h = mix64(h ^ ch)
        else:
            h = mix64(h ^ (int(p) & MASK64))
    return h


class Stream:
    """Named counter-based random stream.

    Draws are a pure function of (seed, name, draw index), so interleaving
    with other streams never perturbs the sequence.
    """

    __slots__ = ("key", "counter", "_block", "_block_start")

    def __init__(self, seed: int, name: str):
        self.key = fold(seed, name)
        self.counter = 0
        self._block = None
        self._block_start = 0

    def u64(self) -> int:
        self.counter += 1
        return mix64((self.key + self.counter * _GAMMA) & MASK64)

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        return self.u64() % n

    def chance(self, p: float) -> bool:
        return self.uniform() < p

    def uniform_array(self, n: int) -> np.ndarray:
        """n uniforms in one shot; bit-identical to n uniform() calls."""
        h = _mix_block(self.key, self.counter, n)
        self.counter += n
        return h * (1.0 / (1 << 53))

    def uniforms(self, n: int) -> list:
        """n uniforms as a python list; same sequence as n uniform() calls.

        Hot path for the per-tick creature batch: draws come from a
        precomputed block (a draw is a pure function of counter, so
        caching ahead is sound). Scalar draws in between just advance the
        cursor into the same block.
        """
        start = self.counter
        blk = self._block
        off = start - self._block_start
        if blk is None or off < 0 or off + n > len(blk):
            size = n if n > 1024 else 1024
            arr = _mix_block(self.key, start, size) * (1.0 / (1 << 53))
            blk = self._block = arr.tolist()
            self._block_start = start
            off = 0
        self.counter = start + n
        return blk[off:off + n]

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def state(self) -> tuple:
        return (self.key, self.counter)

    def restore(self, state: tuple) -> None:
        self.key, self.counter = state
        self._block = None


def hash_grid(key: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized mix64 over integer lattice coordinates. Returns uint64."""
    with np.errstate(over="ignore"):
        h = (
            np.uint64(key)
            ^ (xs.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15))
            ^ (ys.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F))
        )
        h = (h ^ (h >> np.uint64(30))) * np.uint64(_MIX1)
        h = (h ^ (h >> np.uint64(27))) * np.uint64(_MIX2)
        return h ^ (h >> np.uint64(31))


def _lattice_values(key: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Pseudo-random lattice values in [-1, 1]."""
    h = hash_grid(key, xs, ys)
    return (h >> np.uint64(11)).astype(np.float64) * (2.0 / (1 << 53)) - 1.0


def value_noise(key: int, xs: np.ndarray, ys: np.ndarray, freq: float) -> np.ndarray:
    """Bilinear value noise over a hashed lattice; smooth, seamless, bit-exact."""
    fx = xs * freq
    fy = ys * freq
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    tx = fx - x0
    ty = fy - y0
    # smoothstep fade
    tx = tx * tx * (3.0 - 2.0 * tx)
    ty = ty * ty * (3.0 - 2.0 * ty)
    v00 = _lattice_values(key, x0, y0)
    v10 = _lattice_values(key, x0 + 1, y0)
    v01 = _lattice_values(key, x0, y0 + 1)
    v11 = _lattice_values(key, x0 + 1, y0 + 1)
    top = v00 + (v10 - v00) * tx
    bot = v01 + (v11 - v01) * tx
    return top + (bot - top) * ty


def fbm(key: int, xs: np.ndarray, ys: np.ndarray, freq: float, octaves: int = 3) -> np.ndarray:
    """Fractal sum of value-noise octaves, amplitude halving each octave."""
    total = np.zeros(np.broadcast(xs, ys).shape, dtype=np.float64)
    amp = 1.0
    norm = 0.0
    for o in range(octaves):
        total += amp * value_noise(fold(key, o), xs, ys, freq * (2 ** o))
        norm += amp
        amp *= 0.5
    return total / norm
