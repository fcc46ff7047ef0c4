"""Episode-facing environment API: reset/step, batching, stats, replay.

An Env owns one episode at a time and composes worldgen, the simulator,
scoring, and the renderer. BatchEnv steps many lanes with auto-reset;
ProcessBatchEnv runs the lanes in worker processes behind the same
interface, exchanging observations through shared memory.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing as mp
from dataclasses import dataclass

import numpy as np

from . import simcore
from .observe import render
from .oodconfig import EnvSpec
from .rng import fold
from .rules import Ruleset, load_rules
from .scoring import ACHIEVEMENTS, AchievementLedger, crafter_score, reward
from .simcore import ContractError
from .worldgen import GenParams, generate

RECORD_VERSION = 1

_NO_FRESH = frozenset()


def genparams_for(spec: EnvSpec, seed: int) -> GenParams:
    w = spec.world
    kwargs = {}
    if "width" in w:
        kwargs["width"] = w["width"]
    if "height" in w:
        kwargs["height"] = w["height"]
    if "fractions" in w:
        kwargs["fractions"] = dict(w["fractions"])
    if "noise_scales" in w:
        kwargs["noise_scales"] = dict(w["noise_scales"])
    return GenParams(seed=seed, count_targets=dict(spec.counts), **kwargs)


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


class StatsLogger:
    """Append-only line-delimited episode stats, one JSON object per line."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "a")

    def write(self, line: dict):
        self._fh.write(json.dumps(line) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    @staticmethod
    def read(path):
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]


def stats_line(length: int, total_reward: float, counts: dict) -> dict:
    line = {"length": length, "reward": round(total_reward, 1)}
    for name in ACHIEVEMENTS:
        line[f"achievement_{name}"] = counts.get(name, 0)
    return line


def rates_from_stats(lines) -> list:
    """Percentage of logged episodes with at least one unlock, per achievement."""
    if not lines:
        raise ValueError("empty stats log")
    n = len(lines)
    return [100.0 * sum(1 for ln in lines if ln.get(f"achievement_{a}", 0) > 0) / n
            for a in ACHIEVEMENTS]


def score_from_stats(lines) -> float:
    return crafter_score(rates_from_stats(lines))


class Env:
    """One environment lane. step() between reset() and done, never after."""

    def __init__(self, spec: EnvSpec, rules: Ruleset | None = None,
                 stats: StatsLogger | None = None, record: bool = False):
        self.spec = spec
        self.rules = rules if rules is not None else load_rules()
        self.stats = stats
        self.record = record
        self.state = None
        self.ledger = AchievementLedger()
        self.episode_seed = None
        self._ep_len = 0
        self._ep_reward = 0.0
        self._ep_counts = {}
        self._actions = []

    def reset(self, seed: int) -> np.ndarray:
        self.episode_seed = int(seed)
        world, entities = generate(genparams_for(self.spec, fold(seed, "world")))
        self.state = simcore.init_state(
            world, entities, seed, self.spec.appearance, self.spec.counts,
            self.rules, episode_cap=self.spec.episode_cap)
        self.ledger.unlocked.clear()
        self._ep_len = 0
        self._ep_reward = 0.0
        self._ep_counts = {}
        self._actions = []
        return render(self.state, self.spec)

    def step(self, action) -> StepResult:
        if self.state is None:
            raise ContractError("step() before reset()")
        events = simcore.step(self.state, action)
        if events.achievements:
            before = set(self.ledger.unlocked)
            r, _ = reward(events, self.ledger)
            fresh = self.ledger.unlocked - before
            for name in events.achievements:
                self._ep_counts[name] = self._ep_counts.get(name, 0) + 1
        else:  # nothing unlocked: reward reduces to the health term
            r = 0.1 * events.health_delta
            fresh = _NO_FRESH
        self._ep_len += 1
        self._ep_reward += r
        if self.record:
            self._actions.append(int(action))
        done = simcore.is_terminal(self.state)
        info = {"achievements": fresh, "health_delta": events.health_delta,
                "died": events.died}
        if done:
            info["episode"] = {"length": self._ep_len, "reward": self._ep_reward,
                               "unlocked": frozenset(self.ledger.unlocked)}
            if self.stats is not None:
                self.stats.write(stats_line(self._ep_len, self._ep_reward,
                                            self._ep_counts))
            self.ledger.finish_episode()
        return StepResult(render(self.state, self.spec), r, done, info)

    def export_record(self) -> dict:
        """Replayable episode transcript; call once the episode is done."""
        if not self.record:
            raise ValueError("env was not recording")
        return {
            "version": RECORD_VERSION,
            "seed": self.episode_seed,
            "spec": self.spec.to_dict(),
            "spec_digest": self.spec.digest(),
            "actions": list(self._actions),
            "length": self._ep_len,
            "reward": round(self._ep_reward, 10),
            "state_digest": simcore.state_digest(self.state).hex(),
        }


def replay_record(record: dict, rules: Ruleset | None = None):
    """Re-run a recorded episode; returns (ok, detail)."""
    if record.get("version") != RECORD_VERSION:
        return False, f"unsupported record version {record.get('version')!r}"
    spec = EnvSpec.from_dict(record["spec"])
    if spec.digest() != record["spec_digest"]:
        return False, "spec digest mismatch"
    env = Env(spec, rules=rules)
    env.reset(record["seed"])
    total = 0.0
    for action in record["actions"]:
        result = env.step(action)
        total += result.reward
    digest = simcore.state_digest(env.state).hex()
    if digest != record["state_digest"]:
        return False, "state digest mismatch"
    if abs(total - record["reward"]) > 1e-9:
        return False, f"reward mismatch: {total} vs {record['reward']}"
    if env._ep_len != record["length"]:
        return False, f"length mismatch: {env._ep_len} vs {record['length']}"
    return True, "byte-exact"


def episode_seed(run_seed: int, lane: int, episode: int) -> int:
    return fold(run_seed, "lane", lane, "episode", episode)


class BatchEnv:
    """Sequential multi-lane stepping with auto-reset.

    On a terminal step the returned observation is the next episode's first
    frame and info carries the finished episode under "episode" plus an
    "episode_boundary" flag; reward/done describe the finished step.
    """

    def __init__(self, spec, n_lanes, run_seed, rules=None, stats=None,
                 auto_reset=True):
        self.spec = spec
        self.n_lanes = n_lanes
        self.run_seed = run_seed
        self.auto_reset = auto_reset
        self.envs = [Env(spec, rules=rules, stats=stats) for _ in range(n_lanes)]
        self._episode_idx = [0] * n_lanes

    def reset_all(self):
        return [env.reset(episode_seed(self.run_seed, lane, 0))
                for lane, env in enumerate(self.envs)]

    def step_batch(self, actions) -> list:
        if len(actions) != self.n_lanes:
            raise ValueError(f"{len(actions)} actions for {self.n_lanes} lanes")
        out = []
        for lane, (env, action) in enumerate(zip(self.envs, actions)):
            result = env.step(action)
            if result.done and self.auto_reset:
                self._episode_idx[lane] += 1
                obs = env.reset(episode_seed(self.run_seed, lane,
                                             self._episode_idx[lane]))
                result = StepResult(obs, result.reward, result.done,
                                    dict(result.info, episode_boundary=True))
            out.append(result)
        return out

    def close(self):
        pass


def _worker_main(conn, spec_dict, lanes, run_seed, shm_name, n_total,
                 rule_overrides):
    from multiprocessing import shared_memory
    spec = EnvSpec.from_dict(spec_dict)
    rules = load_rules(rule_overrides)
    shm = shared_memory.SharedMemory(name=shm_name)
    obs_block = np.ndarray((n_total, 64, 64, 3), dtype=np.uint8, buffer=shm.buf)
    rew_block = np.ndarray((n_total,), dtype=np.float64,
                           buffer=shm.buf, offset=n_total * 64 * 64 * 3)
    done_block = np.ndarray((n_total,), dtype=np.uint8, buffer=shm.buf,
                            offset=n_total * (64 * 64 * 3 + 8))
    envs = {lane: Env(spec, rules=rules) for lane in lanes}
    episode_idx = {lane: 0 for lane in lanes}
    try:
        while True:
            msg = conn.recv()
            kind = msg[0]
            if kind == "reset":
                for lane in lanes:
                    obs_block[lane] = envs[lane].reset(
                        episode_seed(run_seed, lane, 0))
                conn.send(("ok",))
            elif kind == "step":
                actions = msg[1]
                infos = {}
                for lane in lanes:
                    result = envs[lane].step(actions[lane])
                    done = result.done
                    if done:
                        infos[lane] = {k: v for k, v in result.info.items()
                                       if k == "episode"}
                        episode_idx[lane] += 1
                        obs = envs[lane].reset(
                            episode_seed(run_seed, lane, episode_idx[lane]))
                        obs_block[lane] = obs
                    else:
                        obs_block[lane] = result.observation
                    rew_block[lane] = result.reward
                    done_block[lane] = 1 if done else 0
                conn.send(("ok", infos))
            elif kind == "close":
                conn.send(("ok",))
                return
    finally:
        shm.close()


class ProcessBatchEnv:
    """BatchEnv with lanes spread over worker processes (always auto-reset).

    Observations and rewards come back through one shared-memory block, so
    the per-step IPC payload is a few bytes per worker.
    """

    def __init__(self, spec, n_lanes, run_seed, n_workers=None,
                 rule_overrides=None):
        from multiprocessing import shared_memory
        self.n_lanes = n_lanes
        n_workers = min(n_workers or mp.cpu_count(), n_lanes)
        size = n_lanes * (64 * 64 * 3 + 8 + 1)
        self._shm = shared_memory.SharedMemory(create=True, size=size)
        self._obs = np.ndarray((n_lanes, 64, 64, 3), dtype=np.uint8,
                               buffer=self._shm.buf)
        self._rew = np.ndarray((n_lanes,), dtype=np.float64,
                               buffer=self._shm.buf, offset=n_lanes * 64 * 64 * 3)
        self._done = np.ndarray((n_lanes,), dtype=np.uint8, buffer=self._shm.buf,
                                offset=n_lanes * (64 * 64 * 3 + 8))
        ctx = mp.get_context("fork")
        self._conns = []
        self._procs = []
        chunks = [list(range(n_lanes))[i::n_workers] for i in range(n_workers)]
        for lanes in chunks:
            parent, child = ctx.Pipe()
            proc = ctx.Process(target=_worker_main,
                               args=(child, spec.to_dict(), lanes, run_seed,
                                     self._shm.name, n_lanes, rule_overrides),
                               daemon=True)
            proc.start()
            child.close()
            self._conns.append(parent)
            self._procs.append(proc)

    def reset_all(self):
        for conn in self._conns:
            conn.send(("reset",))
        for conn in self._conns:
            conn.recv()
        return [self._obs[i].copy() for i in range(self.n_lanes)]

    def step_batch(self, actions):
        actions = {i: int(a) for i, a in enumerate(actions)}
        for conn in self._conns:
            conn.send(("step", actions))
        infos = {}
        for conn in self._conns:
            reply = conn.recv()
            infos.update(reply[1])
        out = []
        for lane in range(self.n_lanes):
            done = bool(self._done[lane])
            info = dict(infos.get(lane, {}))
            if done:
                info["episode_boundary"] = True
            out.append(StepResult(self._obs[lane].copy(), float(self._rew[lane]),
                                  done, info))
        return out

    def close(self):
        for conn in self._conns:
            try:
                conn.send(("close",))
                conn.recv()
            except (BrokenPipeError, EOFError):
                pass
        for proc in self._procs:
            proc.join(timeout=2)
        self._shm.close()
        self._shm.unlink()


def obs_digest(obs: np.ndarray) -> str:
    return hashlib.sha256(obs.tobytes()).hexdigest()
