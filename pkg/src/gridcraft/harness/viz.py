"""Attention montages: top row input frames, bottom row attention intensity,
episode steps left to right."""

import numpy as np
from PIL import Image

from .. import agents
from ..envapi import Env, episode_seed
from ..nnet import autodiff as tz
from ..nnet.checkpoint import load_checkpoint
from ..ppo import sample_actions
from ..rng import fold

OBS = 64


def attention_intensity(amap, size=OBS):
    """AttentionMap -> (size, size) float array in [0, 1].

    Head (and slot) dimensions are averaged; each patch's weight is
    painted over its input footprint, overlaps averaged, then the frame
    is normalized by its own maximum so intensity is comparable within a
    frame, not across frames.
    """
    per_patch = amap.weights.mean(axis=(0, 1))  # (k,)
    rows, cols = amap.grid
    canvas = np.zeros((size, size))
    cover = np.zeros((size, size))
    i = 0
    for r in range(rows):
        for c in range(cols):
            y, x = r * amap.stride, c * amap.stride
            canvas[y:y + amap.patch_size, x:x + amap.patch_size] += per_patch[i]
            cover[y:y + amap.patch_size, x:x + amap.patch_size] += 1.0
            i += 1
    cover[cover == 0] = 1.0
    canvas /= cover
    peak = canvas.max()
    if peak > 0:
        canvas /= peak
    return canvas


def episode_attention(agent_config, params, spec, seed, n_steps=8, every=1,
                      rules=None):
    """Play one seeded episode; keep every `every`-th frame + attention map.

    Returns (frames, intensities, actions); stops early if the episode
    ends. Raises UnsupportedArchitectureError for attention-free agents.
    """
    env = Env(spec, rules=rules)
    obs = env.reset(episode_seed(seed, 0, 0))
    rng = np.random.default_rng(fold(seed, "viz-actions"))
    frames, intens, taken = [], [], []
    for t in range(n_steps * every):
        with tz.no_grad():
            out = agents.forward(agent_config, params, obs)
        if t % every == 0:
            amap = agents.extract_attention(out)[-1]
            frames.append(obs.copy())
            intens.append(attention_intensity(amap))
        action, _ = sample_actions(out.logits.data, rng)
        taken.append(int(action[0]))
        result = env.step(int(action[0]))
        obs = result.observation
        if result.done:
            break
    return frames, intens, taken


def montage(frames, intensities, scale=4, gap=2):
    """Two-row image: inputs on top, grayscale attention below."""
    if not frames:
        raise ValueError("montage needs at least one frame")
    n = len(frames)
    cell = frames[0].shape[0]
    width = n * cell + (n - 1) * gap
    height = 2 * cell + gap
    sheet = np.full((height, width, 3), 255, dtype=np.uint8)
    for i, (frame, inten) in enumerate(zip(frames, intensities)):
        x = i * (cell + gap)
        sheet[0:cell, x:x + cell] = frame
        gray = (inten * 255).astype(np.uint8)
        sheet[cell + gap:, x:x + cell] = gray[:, :, None]
    img = Image.fromarray(sheet)
    if scale != 1:
        img = img.resize((width * scale, height * scale), Image.NEAREST)
    return img


def save_attention_montage(checkpoint_path, spec, seed, out_path, n_steps=8,
                           every=1, scale=4, rules=None):
    ck = load_checkpoint(checkpoint_path)
    cfg = agents.AgentConfig.from_dict(ck.config["agent"])
    params = {k: tz.parameter(v) for k, v in ck.params.items()}
    frames, intens, _ = episode_attention(cfg, params, spec, seed,
                                          n_steps=n_steps, every=every,
                                          rules=rules)
    img = montage(frames, intens, scale=scale)
    img.save(out_path)
    return out_path, len(frames)
