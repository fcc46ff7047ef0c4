"""The six policy architectures over 64x64x3 observations.

PPO-CNN, PPO-SPCNN, LSTM-CNN, LSTM-SPCNN, OC-SA and OC-CA all map an
observation to 17 action logits and a value estimate. Parameters live in a
flat name -> Tensor dict so checkpoints and the optimizer stay oblivious
to architecture; forward() dispatches on the config tag.

Sizes follow the published layer tables. The CNN paddings are (0, 1, 0):
the source table omits padding, and this choice lands the parameter count
at 904,882, matching the quoted "1M" total; zero padding everywhere would
give 610k. The LSTM-SPCNN critic is a plain linear stack, not an LSTM;
that asymmetry is in the source table and kept literally.
"""

import dataclasses

import numpy as np

from . import nnet
from .nnet import autodiff as tz
from .nnet.layers import PatchSequence

N_ACTIONS = 17
OBS_SIZE = 64
ARCHITECTURES = ("ppo_cnn", "ppo_spcnn", "lstm_cnn", "lstm_spcnn", "oc_sa", "oc_ca")
_OC = ("oc_sa", "oc_ca")
_LSTM = ("lstm_cnn", "lstm_spcnn")
_SPCNN_TRUNK = ("ppo_spcnn", "lstm_spcnn", "oc_sa", "oc_ca")
_CNN_PADDINGS = (0, 1, 0)


class UnsupportedArchitectureError(ValueError):
    pass


@dataclasses.dataclass
class AgentConfig:
    architecture: str
    patch_size: int = 0
    stride: int = 0
    n_slots: int = 0
    n_heads: int = 8
    d_model: int = 256
    fc_dim: int = 512
    lstm_dim: int = 256
    cnn_channels: tuple = (32, 64, 64)
    spcnn_channels: int = 64
    use_layernorm: bool = False
    use_residual_mlp: bool = False
    use_slot_competition: bool = False
    use_positional_embeddings: bool = True

    @classmethod
    def default(cls, architecture):
        """Per-architecture defaults from the layer tables."""
        if architecture not in ARCHITECTURES:
            raise UnsupportedArchitectureError(f"unknown architecture {architecture!r}")
        if architecture == "oc_sa":
            return cls(architecture, patch_size=8, stride=8)
        if architecture == "oc_ca":
            return cls(architecture, patch_size=16, stride=16, n_slots=8)
        return cls(architecture)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["cnn_channels"] = list(self.cnn_channels)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["cnn_channels"] = tuple(d.get("cnn_channels", (32, 64, 64)))
        return cls(**d)


@dataclasses.dataclass
class AttentionMap:
    """Attention weights plus the patch geometry needed to paint overlays.

    Inside a PolicyOutput the weights still carry the batch axis
    (N, heads, queries, keys); extract_attention strips it.
    """
    weights: np.ndarray
    patch_size: int
    stride: int
    grid: tuple              # (rows, cols) of the patch grid
    self_attention: bool = False


@dataclasses.dataclass
class PolicyOutput:
    logits: object           # Tensor (N, 17)
    value: object            # Tensor (N,)
    state: tuple = None      # recurrent state, tuple of Tensors
    attention: list = None   # raw per-layer AttentionMap with batched weights


def apply_ablation(config, toggles):
    """Return a copy of config with the named ablation switches applied.

    Valid toggles: "layernorm" and "residual_mlp" insert those blocks after
    each attention layer (OC architectures only); "slot_competition" turns
    the cross-attention softmax onto the slot axis (OC-CA only);
    "no_positional_embeddings" drops the additive position table.
    """
    cfg = dataclasses.replace(config)
    for toggle in toggles:
        if toggle in ("layernorm", "residual_mlp", "no_positional_embeddings"):
            if config.architecture not in _OC:
                raise ValueError(f"{toggle} only applies to attention architectures")
        if toggle == "layernorm":
            cfg.use_layernorm = True
        elif toggle == "residual_mlp":
            cfg.use_residual_mlp = True
        elif toggle == "no_positional_embeddings":
            cfg.use_positional_embeddings = False
        elif toggle == "slot_competition":
            if config.architecture != "oc_ca":
                raise ValueError("slot_competition only applies to oc_ca")
            cfg.use_slot_competition = True
        else:
            raise ValueError(f"unknown ablation toggle {toggle!r}")
    return cfg


# ------------------------------------------------------------ parameters

def _cnn_flat_dim(config):
    size = OBS_SIZE
    kernels = ((8, 4), (4, 2), (3, 1))
    for (k, s), p in zip(kernels, _CNN_PADDINGS):
        size = nnet.conv_output_size(size, k, s, p)
    return size * size * config.cnn_channels[-1]


def _feature_dim(config):
    if config.architecture in _OC:
        return config.d_model
    if config.architecture in _LSTM:
        return config.lstm_dim
    return config.fc_dim


def init_params(config, seed, dtype=np.float32):
    """Build the parameter dict for an architecture, deterministically from seed.

    Linear and conv weights are orthogonal (relu layers with sqrt(2) gain,
    the policy head with 0.01, everything else 1); CLS and slots are unit
    Gaussian; biases start at zero except LSTM forget gates, which start
    at 1 so memories survive early training.
    """
    if config.architecture not in ARCHITECTURES:
        raise UnsupportedArchitectureError(f"unknown architecture {config.architecture!r}")
    rng = np.random.default_rng(seed)
    relu_gain = float(np.sqrt(2.0))
    p = {}

    def lin(name, d_in, d_out, gain):
        p[f"{name}.w"] = tz.parameter(nnet.orthogonal(rng, (d_in, d_out), gain, dtype))
        p[f"{name}.b"] = tz.parameter(np.zeros(d_out, dtype=dtype))

    def conv(name, oc, ic, k, gain=relu_gain):
        p[f"{name}.w"] = tz.parameter(nnet.orthogonal(rng, (oc, ic, k, k), gain, dtype))
        p[f"{name}.b"] = tz.parameter(np.zeros(oc, dtype=dtype))

    def lstm(name, d_in, hidden):
        p[f"{name}.wx"] = tz.parameter(nnet.orthogonal(rng, (d_in, 4 * hidden), 1.0, dtype))
        p[f"{name}.wh"] = tz.parameter(nnet.orthogonal(rng, (hidden, 4 * hidden), 1.0, dtype))
        b = np.zeros(4 * hidden, dtype=dtype)
        b[hidden:2 * hidden] = 1.0
        p[f"{name}.b"] = tz.parameter(b)

    arch = config.architecture
    if arch in ("ppo_cnn", "lstm_cnn"):
        c1, c2, c3 = config.cnn_channels
        conv("cnn1", c1, 3, 8)
        conv("cnn2", c2, c1, 4)
        conv("cnn3", c3, c2, 3)
        lin("fc", _cnn_flat_dim(config), config.fc_dim, relu_gain)
    else:
        ch = config.spcnn_channels
        conv("spcnn1", ch, 3, 5)
        for i in (2, 3, 4):
            conv(f"spcnn{i}", ch, ch, 5)
        if arch in ("ppo_spcnn", "lstm_spcnn"):
            lin("fc", OBS_SIZE * OBS_SIZE * ch, config.fc_dim, relu_gain)

    oc_layers = ()
    if arch in _OC:
        d_in = config.patch_size * config.patch_size * config.spcnn_channels
        lin("patch_proj", d_in, config.d_model, 1.0)
        oc_layers = ("sa1", "sa2") if arch == "oc_sa" else ("ca",)
        if arch == "oc_sa":
            p["cls"] = tz.parameter(nnet.unit_gaussian(rng, (1, config.d_model), dtype))
        else:
            p["slots"] = tz.parameter(
                nnet.unit_gaussian(rng, (config.n_slots, config.d_model), dtype))
        for name in oc_layers:
            for head in ("q", "k", "v"):
                lin(f"{name}.{head}", config.d_model, config.d_model, 1.0)

    if arch in _LSTM:
        lstm("actor_lstm", config.fc_dim, config.lstm_dim)
        if arch == "lstm_cnn":
            lstm("critic_lstm", config.fc_dim, config.lstm_dim)
        else:
            # source table lists the LSTM-SPCNN critic as two plain linears
            lin("critic_fc", config.fc_dim, config.lstm_dim, 1.0)

    feat = _feature_dim(config)
    lin("actor", feat, N_ACTIONS, 0.01)
    lin("critic", feat, 1, 1.0)

    # ablation blocks draw last, so the shared base parameters come out
    # bit-identical between a default config and its ablated variants
    for name in oc_layers:
        if config.use_layernorm:
            p[f"{name}.ln.g"] = tz.parameter(np.ones(config.d_model, dtype=dtype))
            p[f"{name}.ln.b"] = tz.parameter(np.zeros(config.d_model, dtype=dtype))
        if config.use_residual_mlp:
            lin(f"{name}.mlp.1", config.d_model, config.d_model, relu_gain)
            # zero final layer: the block starts as an exact identity
            p[f"{name}.mlp.2.w"] = tz.parameter(
                np.zeros((config.d_model, config.d_model), dtype=dtype))
            p[f"{name}.mlp.2.b"] = tz.parameter(np.zeros(config.d_model, dtype=dtype))
    return p


def param_count(params):
    return sum(int(t.data.size) for t in params.values())


def zero_state(config, n_lanes, dtype=np.float32):
    """Initial recurrent state (zeros); None for feedforward architectures."""
    if config.architecture not in _LSTM:
        return None
    shape = (n_lanes, config.lstm_dim)
    n = 4 if config.architecture == "lstm_cnn" else 2
    return tuple(tz.tensor(np.zeros(shape, dtype=dtype)) for _ in range(n))


# --------------------------------------------------------------- forward

def _prep(obs, dtype):
    """uint8 HWC observation (batched or single) -> float NCHW in [0,1]."""
    a = np.asarray(obs)
    if a.ndim == 3:
        a = a[None]
    if a.ndim != 4 or a.shape[1:] != (OBS_SIZE, OBS_SIZE, 3):
        raise ValueError(f"expected (N,{OBS_SIZE},{OBS_SIZE},3) observations, got {a.shape}")
    if a.dtype == np.uint8:
        a = a.astype(dtype) / 255.0
    return tz.tensor(np.ascontiguousarray(a.transpose(0, 3, 1, 2)))


def _cnn_features(config, p, x):
    strides = (4, 2, 1)
    for i, (s, pad) in enumerate(zip(strides, _CNN_PADDINGS), start=1):
        x = tz.relu(nnet.conv2d(x, p[f"cnn{i}.w"], p[f"cnn{i}.b"], s, pad))
    x = tz.reshape(x, (x.shape[0], -1))
    return tz.relu(nnet.linear(x, p["fc.w"], p["fc.b"]))


def _spcnn_map(p, x):
    for i in (1, 2, 3, 4):
        x = tz.relu(nnet.conv2d(x, p[f"spcnn{i}.w"], p[f"spcnn{i}.b"], 1, 2))
    return x


def patch_split(feature_map, patch, stride):
    """Cut a (N,C,H,W) feature map into row-major patch tokens."""
    tokens = tz.extract_patches(feature_map, patch, stride)
    h = feature_map.shape[2]
    rows = (h - patch) // stride + 1
    cols = (feature_map.shape[3] - patch) // stride + 1
    return PatchSequence(tokens=tokens, patch=patch, stride=stride, grid=(rows, cols))


def _project_tokens(config, p, seq):
    tok = nnet.linear(seq.tokens, p["patch_proj.w"], p["patch_proj.b"])
    if config.use_positional_embeddings:
        pe = nnet.sinusoidal_pe(seq.k, config.d_model).astype(tok.dtype)
        tok = tz.add(tok, tz.tensor(np.broadcast_to(pe, tok.shape)))
    return tok


def _attention_block(config, p, name, q_in, kv_in, competition):
    q = nnet.linear(q_in, p[f"{name}.q.w"], p[f"{name}.q.b"])
    k = nnet.linear(kv_in, p[f"{name}.k.w"], p[f"{name}.k.b"])
    v = nnet.linear(kv_in, p[f"{name}.v.w"], p[f"{name}.v.b"])
    out, weights = nnet.multi_head_attention(q, k, v, config.n_heads, competition)
    if config.use_layernorm:
        out = nnet.layernorm(out, p[f"{name}.ln.g"], p[f"{name}.ln.b"])
    if config.use_residual_mlp:
        out = nnet.residual_mlp(out, p[f"{name}.mlp.1.w"], p[f"{name}.mlp.1.b"],
                                p[f"{name}.mlp.2.w"], p[f"{name}.mlp.2.b"])
    return out, weights


def _heads(p, feat):
    logits = nnet.linear(feat, p["actor.w"], p["actor.b"])
    value = tz.reshape(nnet.linear(feat, p["critic.w"], p["critic.b"]), (feat.shape[0],))
    return logits, value


def forward(config, params, obs, state=None):
    """Run one architecture forward; see AgentConfig for the switchboard.

    obs is HWC uint8 (single or batched). For recurrent architectures,
    state carries (h, c) pairs and defaults to zeros; the returned state
    tensors keep the autodiff graph alive, so detach between update steps.
    """
    arch = config.architecture
    dtype = params["actor.w"].dtype
    x = _prep(obs, dtype)
    n = x.shape[0]
    p = params

    if arch == "ppo_cnn":
        feat = _cnn_features(config, p, x)
        logits, value = _heads(p, feat)
        return PolicyOutput(logits, value)

    if arch == "ppo_spcnn":
        fmap = _spcnn_map(p, x)
        feat = tz.relu(nnet.linear(tz.reshape(fmap, (n, -1)), p["fc.w"], p["fc.b"]))
        logits, value = _heads(p, feat)
        return PolicyOutput(logits, value)

    if arch in _LSTM:
        if arch == "lstm_cnn":
            feat = _cnn_features(config, p, x)
        else:
            fmap = _spcnn_map(p, x)
            feat = tz.relu(nnet.linear(tz.reshape(fmap, (n, -1)), p["fc.w"], p["fc.b"]))
        if state is None:
            state = zero_state(config, n, dtype)
        ha, ca = nnet.lstm_cell(feat, state[0], state[1],
                                p["actor_lstm.wx"], p["actor_lstm.wh"], p["actor_lstm.b"])
        logits = nnet.linear(ha, p["actor.w"], p["actor.b"])
        if arch == "lstm_cnn":
            hc, cc = nnet.lstm_cell(feat, state[2], state[3],
                                    p["critic_lstm.wx"], p["critic_lstm.wh"], p["critic_lstm.b"])
            value = tz.reshape(nnet.linear(hc, p["critic.w"], p["critic.b"]), (n,))
            return PolicyOutput(logits, value, state=(ha, ca, hc, cc))
        vfeat = nnet.linear(feat, p["critic_fc.w"], p["critic_fc.b"])
        value = tz.reshape(nnet.linear(vfeat, p["critic.w"], p["critic.b"]), (n,))
        return PolicyOutput(logits, value, state=(ha, ca))

    if arch in _OC:
        fmap = _spcnn_map(p, x)
        seq = patch_split(fmap, config.patch_size, config.stride)
        tok = _project_tokens(config, p, seq)
        maps = []
        if arch == "oc_sa":
            cls = tz.tile_batch(p["cls"], n)
            h = tz.concat([tok, cls], axis=1)  # CLS token rides at the end
            for name in ("sa1", "sa2"):
                h, w = _attention_block(config, p, name, h, h, "keys")
                maps.append(AttentionMap(w, seq.patch, seq.stride, seq.grid,
                                         self_attention=True))
            feat = h[:, -1, :]
        else:
            slots = tz.tile_batch(p["slots"], n)
            competition = "queries" if config.use_slot_competition else "keys"
            out, w = _attention_block(config, p, "ca", slots, tok, competition)
            maps.append(AttentionMap(w, seq.patch, seq.stride, seq.grid))
            feat = tz.tmean(out, axis=1)
        logits, value = _heads(p, feat)
        return PolicyOutput(logits, value, attention=maps)

    raise UnsupportedArchitectureError(f"unknown architecture {arch!r}")


def extract_attention(output):
    """Pull visualization-ready attention from a single-observation forward.

    OC-SA yields the final layer's CLS query row restricted to the patch
    keys (the CLS self-column is dropped and the row renormalized); OC-CA
    yields every slot row. Weights come back as (heads, queries, keys)
    with batch removed.
    """
    if not output.attention:
        raise UnsupportedArchitectureError("this architecture has no attention maps")
    last = output.attention[-1]
    w = last.weights[0]
    n_patches = last.grid[0] * last.grid[1]
    if last.self_attention:  # CLS query row, dropping the CLS self-column
        row = w[:, -1:, :n_patches]
        row = row / row.sum(axis=-1, keepdims=True)
        return [AttentionMap(row, last.patch_size, last.stride, last.grid, True)]
    return [AttentionMap(w, last.patch_size, last.stride, last.grid)]
