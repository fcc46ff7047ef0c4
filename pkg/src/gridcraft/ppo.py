"""PPO with generalized advantage estimation over batched environment lanes.

The trainer alternates rollout collection (graph-free forward passes,
sampled actions) with clipped-surrogate updates. Feedforward agents train
on shuffled transition minibatches; recurrent agents train on contiguous
time chunks replayed from stored initial states, with state reset at
episode terminals.

Hyper-parameter defaults are the tuned values: lr 3e-4, 4096-step
rollouts, batch 128, 4 epochs, gamma 0.95, GAE lambda 0.65, clip 0.2.
Entropy 0.01 and value coefficient 0.5 follow the baseline implementation
those values were tuned in; rewards are consumed raw.
"""

import dataclasses
import itertools
import json
import math
import os
import time

import numpy as np

from . import agents, nnet
from .envapi import BatchEnv, Env, episode_seed
from .nnet import autodiff as tz
from .nnet.checkpoint import (CheckpointError, config_digest, load_checkpoint,
                              save_checkpoint)
from .rng import fold
from .scoring import ACHIEVEMENTS, crafter_score


class PPOAbortError(RuntimeError):
    """Raised when a loss goes non-finite; carries the diagnostic dump."""

    def __init__(self, message, dump):
        super().__init__(message)
        self.dump = dump


@dataclasses.dataclass
class PPOConfig:
    learning_rate: float = 3e-4
    batch_size: int = 128
    n_rollout_steps: int = 4096   # transitions per update, summed over lanes
    n_epochs: int = 4
    gamma: float = 0.95
    gae_lambda: float = 0.65
    clip_range: float = 0.2
    max_grad_norm: float = 0.5
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    n_lanes: int = 8
    total_steps: int = 1_000_000
    tbptt_len: int = 16
    eval_interval: int = 100_000  # env steps between eval runs; 0 disables
    eval_episodes: int = 100
    checkpoint_interval: int = 0  # env steps between checkpoints; 0: final only

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


class TrainReport:
    """Line-delimited training log; entries stream to disk as they happen."""

    def __init__(self, path=None):
        self.entries = []
        self.path = path
        self._fh = open(path, "a") if path else None

    def add(self, entry):
        self.entries.append(entry)
        if self._fh:
            self._fh.write(json.dumps(entry) + "\n")
            self._fh.flush()

    def close(self):
        if self._fh:
            self._fh.close()
            self._fh = None


class RolloutBuffer:
    """Fixed-size (T, lanes) transition storage for one collection phase."""

    def __init__(self, n_steps, n_lanes, state_shapes=()):
        self.n_steps = n_steps
        self.n_lanes = n_lanes
        self.obs = np.zeros((n_steps, n_lanes, 64, 64, 3), dtype=np.uint8)
        self.actions = np.zeros((n_steps, n_lanes), dtype=np.int64)
        self.logp = np.zeros((n_steps, n_lanes), dtype=np.float64)
        self.values = np.zeros((n_steps, n_lanes), dtype=np.float64)
        self.rewards = np.zeros((n_steps, n_lanes), dtype=np.float64)
        self.dones = np.zeros((n_steps, n_lanes), dtype=np.float64)
        # recurrent state snapshots taken before the forward at each step
        self.states = [np.zeros((n_steps,) + s, dtype=np.float32)
                       for s in state_shapes]
        self.advantages = None
        self.returns = None

    def finish(self, bootstrap_values, gamma, lam):
        self.advantages, self.returns = compute_gae(
            self.rewards, self.values, self.dones, bootstrap_values, gamma, lam)


def compute_gae(rewards, values, terminals, bootstrap_value, gamma, lam):
    """A_t = sum_l (gamma*lam)^l * delta_{t+l}, truncated with a bootstrap.

    delta_t = r_t + gamma * v_{t+1} * (1 - done_t) - v_t, where v_T is
    bootstrap_value. Accepts (T,) vectors or (T, lanes) arrays; returns
    (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    terminals = np.asarray(terminals, dtype=np.float64)
    if not (rewards.shape == values.shape == terminals.shape):
        raise ValueError(f"length mismatch: rewards {rewards.shape}, values "
                         f"{values.shape}, terminals {terminals.shape}")
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError(f"gamma {gamma} and lambda {lam} must lie in [0,1]")
    squeeze = rewards.ndim == 1
    if squeeze:
        rewards, values, terminals = (a[:, None] for a in (rewards, values, terminals))
    boot = np.asarray(bootstrap_value, dtype=np.float64).reshape(-1)
    if boot.shape[0] != rewards.shape[1]:
        raise ValueError(f"bootstrap for {boot.shape[0]} lanes, buffer has {rewards.shape[1]}")
    next_values = np.vstack([values[1:], boot[None, :]])
    deltas = rewards + gamma * next_values * (1.0 - terminals) - values
    adv = np.zeros_like(rewards)
    acc = np.zeros(rewards.shape[1], dtype=np.float64)
    for t in range(rewards.shape[0] - 1, -1, -1):
        acc = deltas[t] + gamma * lam * (1.0 - terminals[t]) * acc
        adv[t] = acc
    ret = adv + values
    if squeeze:
        return adv[:, 0], ret[:, 0]
    return adv, ret


def sample_actions(logits, rng):
    """Sample from the softmax of (N, 17) logits; returns (actions, log-probs)."""
    z = logits.astype(np.float64) - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    totals = e.sum(axis=1)
    u = rng.random(logits.shape[0])
    actions = (e.cumsum(axis=1) / totals[:, None] > u[:, None]).argmax(axis=1)
    logp = z[np.arange(len(actions)), actions] - np.log(totals)
    return actions, logp


# ------------------------------------------------------------------ update

def _normalize(adv):
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def _minibatch_loss(agent_config, params, obs, actions, old_logp, adv, ret,
                    config, state=None, stats=None):
    """Clipped-surrogate loss on one batch slice; advantages arrive normalized."""
    out = agents.forward(agent_config, params, obs, state)
    n = len(actions)
    logp_all = tz.log_softmax(out.logits)
    logp = logp_all[np.arange(n), actions]
    ratio = tz.exp(logp - tz.tensor(old_logp))
    adv_t = tz.tensor(adv)
    surrogate = tz.minimum(tz.mul(ratio, adv_t),
                           tz.mul(tz.clip(ratio, 1.0 - config.clip_range,
                                          1.0 + config.clip_range), adv_t))
    policy_loss = tz.tmean(surrogate) * -1.0
    verr = out.value - tz.tensor(ret)
    value_loss = tz.tmean(tz.mul(verr, verr)) * 0.5
    probs = tz.exp(logp_all)
    entropy = tz.tmean(tz.tsum(tz.mul(probs, logp_all), axis=1)) * -1.0
    loss = policy_loss + config.vf_coef * value_loss - config.ent_coef * entropy
    if stats is not None:
        clipped = float((np.abs(ratio.data - 1.0) > config.clip_range).mean())
        stats.append((float(policy_loss.data), float(value_loss.data),
                      float(entropy.data), clipped, n))
    return loss, out


def _check_finite(loss, context):
    if np.isfinite(loss.data):
        return
    raise PPOAbortError(f"non-finite loss in {context}",
                        {"context": context, "loss": float(loss.data)})


def _explained_variance(buffer):
    ret = buffer.returns.reshape(-1)
    denom = ret.var()
    if denom < 1e-12:
        return 0.0
    return float(1.0 - (ret - buffer.values.reshape(-1)).var() / denom)


def ppo_update(params, optimizer, buffer, agent_config, config, rng):
    """One PPO update over a finished rollout. Mutates params in place.

    Returns (params, report entry). n_epochs shuffled passes; advantages
    are normalized per minibatch; gradients are norm-clipped before each
    optimizer step.
    """
    if buffer.advantages is None:
        raise ValueError("buffer not finished: advantages missing")
    stats = []
    grad_norms = []
    recurrent = bool(buffer.states)
    if recurrent:
        _update_recurrent(params, optimizer, buffer, agent_config, config,
                          rng, stats, grad_norms)
    else:
        _update_feedforward(params, optimizer, buffer, agent_config, config,
                            rng, stats, grad_norms)
    total_n = sum(s[4] for s in stats) or 1
    entry = {
        "loss_policy": sum(s[0] * s[4] for s in stats) / total_n,
        "loss_value": sum(s[1] * s[4] for s in stats) / total_n,
        "entropy": sum(s[2] * s[4] for s in stats) / total_n,
        "clip_fraction": sum(s[3] * s[4] for s in stats) / total_n,
        "grad_norm": float(np.mean(grad_norms)) if grad_norms else 0.0,
        "explained_variance": _explained_variance(buffer),
    }
    return params, entry


def _update_feedforward(params, optimizer, buffer, agent_config, config, rng,
                        stats, grad_norms):
    t_len, lanes = buffer.actions.shape
    n = t_len * lanes
    obs = buffer.obs.reshape(n, 64, 64, 3)
    actions = buffer.actions.reshape(n)
    logp = buffer.logp.reshape(n)
    adv = buffer.advantages.reshape(n)
    ret = buffer.returns.reshape(n)
    for epoch in range(config.n_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            if len(idx) < 2:
                continue  # one sample has no advantage spread to normalize
            loss, _ = _minibatch_loss(agent_config, params, obs[idx],
                                      actions[idx], logp[idx],
                                      _normalize(adv[idx]), ret[idx],
                                      config, stats=stats)
            _check_finite(loss, f"epoch {epoch} offset {lo}")
            optimizer.zero_grad()
            loss.backward()
            grad_norms.append(nnet.clip_grad_norm(params, config.max_grad_norm))
            optimizer.step()


def _update_recurrent(params, optimizer, buffer, agent_config, config, rng,
                      stats, grad_norms):
    """Truncated BPTT: shuffled fixed-length chunks, replayed in parallel.

    Each chunk restarts from the recurrent state snapshotted during
    collection and is masked to zero after terminal steps, exactly as the
    collection pass did.
    """
    t_len, lanes = buffer.actions.shape
    chunk = max(1, config.tbptt_len)
    spans = [(lane, t0, min(t0 + chunk, t_len))
             for lane in range(lanes) for t0 in range(0, t_len, chunk)]
    per_mb = max(1, config.batch_size // chunk)
    hidden = buffer.states[0].shape[-1]
    for epoch in range(config.n_epochs):
        order = rng.permutation(len(spans))
        for lo in range(0, len(spans), per_mb):
            chosen = [spans[i] for i in order[lo:lo + per_mb]]
            # stack only equal-length chunks; the ragged tail runs alone
            by_len = {}
            for s in chosen:
                by_len.setdefault(s[2] - s[1], []).append(s)
            for length, group in sorted(by_len.items()):
                lane_idx = np.array([s[0] for s in group])
                t0s = np.array([s[1] for s in group])
                adv_block = np.stack([buffer.advantages[t0s + j, lane_idx]
                                      for j in range(length)])
                adv_block = _normalize(adv_block)
                state = tuple(tz.tensor(st[t0s, lane_idx])
                              for st in buffer.states)
                total = None
                for j in range(length):
                    rows = t0s + j
                    loss, out = _minibatch_loss(
                        agent_config, params, buffer.obs[rows, lane_idx],
                        buffer.actions[rows, lane_idx],
                        buffer.logp[rows, lane_idx], adv_block[j],
                        buffer.returns[rows, lane_idx], config,
                        state=state, stats=stats)
                    _check_finite(loss, f"epoch {epoch} chunk offset {lo} step {j}")
                    keep = (1.0 - buffer.dones[rows, lane_idx]).astype(np.float32)
                    mask = tz.tensor(np.repeat(keep[:, None], hidden, axis=1))
                    state = tuple(tz.mul(s, mask) for s in out.state)
                    total = loss if total is None else total + loss
                total = total * (1.0 / length)
                optimizer.zero_grad()
                total.backward()
                grad_norms.append(nnet.clip_grad_norm(params, config.max_grad_norm))
                optimizer.step()


# -------------------------------------------------------------- collection

def _collect(env, agent_config, params, config, buffer, obs, state, action_rng):
    """Fill the rollout buffer, returning (next obs, next state, episode infos)."""
    episodes = []
    recurrent = bool(buffer.states)
    for t in range(buffer.n_steps):
        if recurrent:
            for i, st in enumerate(state):
                buffer.states[i][t] = st.data
        with tz.no_grad():
            out = agents.forward(agent_config, params, obs,
                                 state if recurrent else None)
            actions, logp = sample_actions(out.logits.data, action_rng)
            buffer.obs[t] = obs
            buffer.actions[t] = actions
            buffer.logp[t] = logp
            buffer.values[t] = out.value.data
            results = env.step_batch(actions.tolist())
            obs = np.stack([r.observation for r in results])
            dones = np.array([r.done for r in results], dtype=np.float64)
            buffer.rewards[t] = [r.reward for r in results]
            buffer.dones[t] = dones
            for r in results:
                if "episode" in r.info:
                    episodes.append(r.info["episode"])
            if recurrent:
                keep = (1.0 - dones).astype(np.float32)[:, None]
                mask = tz.tensor(np.repeat(keep, state[0].shape[1], axis=1))
                state = tuple(tz.mul(s, mask) for s in out.state)
    with tz.no_grad():
        out = agents.forward(agent_config, params, obs,
                             state if recurrent else None)
    buffer.finish(out.value.data, config.gamma, config.gae_lambda)
    return obs, state, episodes


# ------------------------------------------------------------------- train

def _save(path, params, ckpt_config, optimizer=None, meta=None):
    extra = optimizer.state_arrays() if optimizer else None
    save_checkpoint(path, params, ckpt_config, extra=extra, meta=meta)


def train(train_spec, agent_config, ppo_config, run_seed, run_dir,
          eval_spec=None, rules=None, log=None, stop=None):
    """Full training loop; returns (params, TrainReport).

    Writes train_log.jsonl and checkpoint_final.npz (plus periodic
    checkpoints) under run_dir. A zero step budget returns the freshly
    initialized parameters and an empty report. stop, if given, sees each
    report entry and may end the run early by returning true.
    """
    os.makedirs(run_dir, exist_ok=True)
    params = agents.init_params(agent_config, fold(run_seed, "params"))
    report = TrainReport(os.path.join(run_dir, "train_log.jsonl"))
    ckpt_config = {"agent": agent_config.to_dict(), "ppo": ppo_config.to_dict()}
    final_path = os.path.join(run_dir, "checkpoint_final.npz")
    if ppo_config.total_steps <= 0:
        _save(final_path, params, ckpt_config, meta={"steps": 0})
        report.close()
        return params, report

    lanes = ppo_config.n_lanes
    env = BatchEnv(train_spec, lanes, fold(run_seed, "train-env"), rules=rules)
    obs = np.stack(env.reset_all())
    state = agents.zero_state(agent_config, lanes)
    state_shapes = tuple(s.shape for s in state) if state else ()
    action_rng = np.random.default_rng(fold(run_seed, "actions"))
    shuffle_rng = np.random.default_rng(fold(run_seed, "shuffle"))
    optimizer = nnet.Adam(params, lr=ppo_config.learning_rate, eps=1e-5)
    per_lane = max(1, ppo_config.n_rollout_steps // lanes)

    steps = 0
    update = 0
    next_eval = ppo_config.eval_interval or None
    next_ckpt = ppo_config.checkpoint_interval or None
    ep_window = []
    try:
        while steps < ppo_config.total_steps:
            t_len = min(per_lane,
                        math.ceil((ppo_config.total_steps - steps) / lanes))
            buffer = RolloutBuffer(t_len, lanes, state_shapes)
            t0 = time.perf_counter()
            obs, state, episodes = _collect(env, agent_config, params,
                                            ppo_config, buffer, obs, state,
                                            action_rng)
            steps += t_len * lanes
            params, entry = ppo_update(params, optimizer, buffer,
                                       agent_config, ppo_config, shuffle_rng)
            update += 1
            ep_window = (ep_window + episodes)[-100:]
            entry["update"] = update
            entry["steps"] = steps
            entry["sps"] = round(t_len * lanes / (time.perf_counter() - t0), 1)
            if ep_window:
                entry["ep_reward_mean"] = float(np.mean([e["reward"] for e in ep_window]))
                entry["ep_length_mean"] = float(np.mean([e["length"] for e in ep_window]))
                entry["ep_unlock_rates"] = _window_rates(ep_window)
            if next_eval is not None and steps >= next_eval:
                score, rates = _evaluate_params(
                    agent_config, params, eval_spec or train_spec,
                    ppo_config.eval_episodes, fold(run_seed, "eval", steps),
                    rules)
                entry["eval_score"] = score
                entry["eval_rates"] = rates
                next_eval += ppo_config.eval_interval
            report.add(entry)
            if log:
                log(entry)
            if next_ckpt is not None and steps >= next_ckpt:
                _save(os.path.join(run_dir, f"checkpoint_{steps}.npz"),
                      params, ckpt_config, optimizer, meta={"steps": steps})
                next_ckpt += ppo_config.checkpoint_interval
            if stop is not None and stop(entry):
                break
    except PPOAbortError as err:
        dump_path = os.path.join(run_dir, "abort_dump.json")
        with open(dump_path, "w") as fh:
            json.dump(dict(err.dump, steps=steps, update=update), fh, indent=2)
        report.close()
        raise
    _save(final_path, params, ckpt_config, optimizer, meta={"steps": steps})
    report.close()
    return params, report


def _window_rates(ep_window):
    """Unlock rates (percent) over recent episodes, nonzero entries only."""
    n = len(ep_window)
    tally = {}
    for ep in ep_window:
        for name in ep["unlocked"]:
            tally[name] = tally.get(name, 0) + 1
    return {name: 100.0 * c / n for name, c in sorted(tally.items())}


# -------------------------------------------------------------- evaluation

def random_policy(seed):
    rng = np.random.default_rng(seed)
    return lambda obs: int(rng.integers(0, agents.N_ACTIONS))


def run_episodes(policy, spec, n_episodes, seed, rules=None, stats=None):
    """Run seeded episodes with policy(obs) -> action; score the batch.

    If the policy object has a reset() method it is called at every
    episode start (recurrent policies hold state). Returns
    (crafter score, rates dict in roster order, per-episode info list).
    """
    if n_episodes <= 0:
        raise ValueError(f"n_episodes must be positive, got {n_episodes}")
    env = Env(spec, rules=rules, stats=stats)
    unlocked = []
    infos = []
    for i in range(n_episodes):
        obs = env.reset(episode_seed(seed, 0, i))
        if hasattr(policy, "reset"):
            policy.reset()
        while True:
            result = env.step(policy(obs))
            obs = result.observation
            if result.done:
                break
        ep = result.info["episode"]
        unlocked.append(ep["unlocked"])
        infos.append({"length": ep["length"], "reward": ep["reward"]})
    rates = {a: 100.0 * sum(a in u for u in unlocked) / n_episodes
             for a in ACHIEVEMENTS}
    return crafter_score(list(rates.values())), rates, infos


class AgentPolicy:
    """Sampling policy wrapper around a parameter set, for evaluation runs."""

    def __init__(self, agent_config, params, seed):
        self.config = agent_config
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.state = None

    def reset(self):
        self.state = None

    def __call__(self, obs):
        with tz.no_grad():
            out = agents.forward(self.config, self.params, obs, self.state)
        self.state = out.state
        action, _ = sample_actions(out.logits.data, self.rng)
        return int(action[0])


def evaluate(checkpoint, eval_spec, n_episodes=100, seed=0, agent_config=None,
             rules=None, stats=None):
    """Score a checkpoint over seeded evaluation episodes.

    checkpoint is a path or a loaded Checkpoint. If agent_config is given
    its digest must match the checkpoint's stored agent config, otherwise
    the evaluation refuses to run. Returns (score, rates dict, infos).
    """
    if isinstance(checkpoint, (str, os.PathLike)):
        checkpoint = load_checkpoint(checkpoint)
    stored = checkpoint.config["agent"]
    if agent_config is not None:
        want = config_digest(agent_config.to_dict())
        have = config_digest(stored)
        if want != have:
            raise CheckpointError(
                f"agent config digest mismatch: checkpoint {have[:12]}, "
                f"requested {want[:12]}")
    cfg = agents.AgentConfig.from_dict(stored)
    params = {k: tz.parameter(v) for k, v in checkpoint.params.items()}
    policy = AgentPolicy(cfg, params, fold(seed, "eval-actions"))
    return run_episodes(policy, eval_spec, n_episodes, seed, rules, stats)


def _evaluate_params(agent_config, params, spec, n_episodes, seed, rules):
    policy = AgentPolicy(agent_config, params, fold(seed, "eval-actions"))
    score, rates, _ = run_episodes(policy, spec, n_episodes, seed, rules)
    return score, rates


# ------------------------------------------------------------------- sweep

def sweep(train_spec, agent_config, base_config, grid, run_seed, out_dir,
          eval_spec=None, rules=None, log=None):
    """Train once per point of a hyper-parameter grid; collect final scores.

    grid maps PPOConfig field names to value lists. Results land in
    out_dir/sweep.json; each run keeps its own subdirectory. The full
    published heatmap grids are left to the caller's compute budget.
    """
    names = sorted(grid)
    results = []
    for combo in itertools.product(*(grid[k] for k in names)):
        overrides = dict(zip(names, combo))
        cfg = dataclasses.replace(base_config, **overrides)
        tag = "_".join(f"{k}-{v}" for k, v in overrides.items())
        run_dir = os.path.join(out_dir, tag)
        params, report = train(train_spec, agent_config, cfg,
                               fold(run_seed, tag), run_dir,
                               eval_spec=eval_spec, rules=rules, log=log)
        score, rates = _evaluate_params(
            agent_config, params, eval_spec or train_spec,
            max(1, cfg.eval_episodes), fold(run_seed, tag, "final"), rules)
        results.append({"overrides": overrides, "score": score,
                        "run_dir": run_dir})
    with open(os.path.join(out_dir, "sweep.json"), "w") as fh:
        json.dump(results, fh, indent=2)
    return results
