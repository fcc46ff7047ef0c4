"""Release-gate checks: one pass/fail test per headline claim.

The per-module suites cover the pieces; these tests pin the end-to-end
numbers with their stated tolerances. The slow entries (the PPO smoke
run above all) put this module in the minutes range, so run it last or
on its own.

Two scope notes. The batch-scaling check needs eight physical cores and
skips loudly on smaller hosts. The cross-attention permutation check
operates at the patch-token interface: the conv stack's 5x5 kernels pad
and leak across pixel-block borders, so permuting pixel blocks is a
physically different observation; permuting the token sequence after
patch extraction is the order claim the architecture actually makes.
"""

import dataclasses
import itertools
import os
import time
from collections import deque

import numpy as np
import pytest
import scipy.stats
from mpmath import mp
from starlette.testclient import TestClient

from conftest import fd_gradcheck, param64
from gridcraft import agents
from gridcraft.agents import (AgentConfig, PatchSequence, apply_ablation,
                              extract_attention, forward, init_params,
                              param_count, patch_split)
from gridcraft.envapi import Env, ProcessBatchEnv, replay_record
from gridcraft.harness.cli import main
from gridcraft.harness.server import build_app
from gridcraft.nnet import autodiff as tz
from gridcraft.nnet.layers import attention, linear, lstm_cell, residual_mlp
from gridcraft.oodconfig import (NUM_PRESETS, VARIANT_CLASSES, EnvSpec,
                                 builtin_presets, numbers_spec,
                                 sample_variant, uniform_appearance)
from gridcraft.ppo import (PPOConfig, compute_gae, random_policy,
                           run_episodes, train)
from gridcraft.rng import Stream, fold
from gridcraft.rules import load_rules
from gridcraft.scoring import ACHIEVEMENTS, crafter_score
from gridcraft.simcore import Action, init_state, step
from gridcraft.worldgen import (Material, round_half_up,
                                worldmap_from_layout)

RULES = load_rules()

ROSTER = ("collect_wood", "collect_stone", "collect_coal", "collect_iron",
          "collect_diamond", "collect_drink", "collect_sapling", "eat_cow",
          "eat_plant", "defeat_zombie", "defeat_skeleton",
          "make_wood_pickaxe", "make_stone_pickaxe", "make_iron_pickaxe",
          "make_wood_sword", "make_stone_sword", "make_iron_sword",
          "place_stone", "place_table", "place_furnace", "place_plant",
          "wake_up")


def micro(layout, inv=None, seed=1):
    """Stepping-ready micro world from ASCII art, no creatures."""
    world = worldmap_from_layout(layout)
    state = init_state(world, [], seed, uniform_appearance(), {}, RULES,
                       episode_cap=10000)
    if inv:
        state.player.inventory.update(inv)
    return state


def obs_batch(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(n, 64, 64, 3), dtype=np.uint8)


# ---------------------------------------------------------------- scoring

def test_score_endpoints_are_exact():
    assert crafter_score([0.0] * 22) == 0.0
    assert crafter_score([100.0] * 22) == 100.0


def test_score_single_unlock_matches_high_precision_reference():
    # one achievement at 100%: exp(ln(101)/22) - 1, computed at 50 digits
    mp.dps = 50
    oracle = mp.power(101, mp.mpf(1) / 22) - 1
    assert round(float(oracle), 5) == 0.23340
    got = crafter_score([100.0] + [0.0] * 21)
    assert abs(got - float(oracle)) < 1e-5


# ------------------------------------------------------------ determinism

def test_hundred_random_episodes_replay_byte_exact():
    records = []
    for i in range(100):
        env = Env(EnvSpec(), record=True)
        env.reset(fold(4242, "replay-acceptance", i))
        acts = Stream(fold(4242, "replay-actions", i), "acts")
        for _ in range(500):
            if env.step(acts.randint(17)).done:
                break
        records.append(env.export_record())
    for _ in range(2):  # two independent replay passes
        for rec in records:
            ok, detail = replay_record(rec)
            assert ok, detail
            assert detail == "byte-exact"


# ------------------------------------------------------- world populations

@pytest.mark.parametrize("preset", sorted(NUM_PRESETS))
def test_static_material_counts_exact(preset):
    targets = NUM_PRESETS[preset]
    env = Env(numbers_spec(preset))
    for seed in (11, 12, 13):
        env.reset(seed)
        cells = np.frombuffer(bytes(env.state.cells_b), dtype=np.uint8)
        assert (cells == Material.TREE).sum() == round_half_up(targets["tree"])
        assert (cells == Material.COAL).sum() == round_half_up(targets["coal"])


def test_creature_populations_hold_steady_within_20pct():
    """Spawn/despawn pressure keeps live counts near the preset targets.

    An immortal stationary observer (vitals topped up before every noop,
    which consumes no randomness) steps 204 thousand-step episodes across
    the six presets; per-class means over the settled tail must sit
    within 20% of the targets.
    """
    for preset, targets in sorted(NUM_PRESETS.items()):
        env = Env(EnvSpec(counts=dict(targets), episode_cap=1000))
        sums = {"cow": 0.0, "zombie": 0.0, "skeleton": 0.0}
        n_samples = 0
        for ep in range(34):
            env.reset(fold(7, "pop", preset, ep))
            for t in range(1, 1001):
                p = env.state.player
                p.health = p.food = p.water = p.energy = 9
                env.step(Action.NOOP)
                if t >= 100 and t % 50 == 0:
                    for k in sums:
                        sums[k] += env.state.counts[k]
                    n_samples += 1
        for k, total in sums.items():
            mean = total / n_samples
            dev = abs(mean - targets[k]) / targets[k]
            assert dev <= 0.20 + 1e-9, (preset, k, mean, targets[k])


def test_variant_sampling_passes_chi_square():
    # 10k draws per class per preset side; alpha 0.01 per cell. The seed
    # is pinned: 96 simultaneous tests at this alpha would otherwise fail
    # somewhere by design about every other run.
    presets = {n: p for n, p in builtin_presets().items()
               if n.startswith("app")}
    assert len(presets) == 8
    for name, (train_spec, eval_spec) in sorted(presets.items()):
        for side, spec in (("train", train_spec), ("eval", eval_spec)):
            label = f"{name}/{side}"
            for cls in VARIANT_CLASSES:
                rng = Stream(fold(27, label, cls), "chi2")
                counts = np.zeros(4)
                for _ in range(10000):
                    counts[sample_variant(cls, spec.appearance, rng) - 1] += 1
                probs = np.asarray(spec.appearance[cls], dtype=float)
                expected = probs * 10000
                zero = probs == 0.0
                assert counts[zero].sum() == 0, (label, cls)
                if (~zero).sum() > 1:
                    p = scipy.stats.chisquare(counts[~zero],
                                              expected[~zero]).pvalue
                    assert p > 0.01, (label, cls, p)


# ----------------------------------------------------------------- training

def gae_double_sum(rewards, values, dones, bootstrap, gamma, lam):
    """Direct double summation over decayed TD residuals."""
    T = rewards.shape[0]
    v_next = np.append(values[1:], bootstrap)
    deltas = rewards + gamma * v_next * (1 - dones) - values
    adv = np.zeros(T)
    for t in range(T):
        acc, coef = 0.0, 1.0
        for k in range(t, T):
            acc += coef * deltas[k]
            coef *= gamma * lam * (1 - dones[k])
        adv[t] = acc
    return adv


def test_gae_matches_double_summation_reference():
    rng = np.random.default_rng(2026)
    for _ in range(1000):
        T = int(rng.integers(1, 65))
        rewards = rng.normal(size=(T, 1))
        values = rng.normal(size=(T, 1))
        dones = (rng.random((T, 1)) < 0.2).astype(float)
        bootstrap = rng.normal(size=(1,))
        gamma = float(rng.uniform(0.8, 1.0))
        lam = float(rng.uniform(0.8, 1.0))
        adv, ret = compute_gae(rewards, values, dones, bootstrap, gamma, lam)
        ref = gae_double_sum(rewards[:, 0], values[:, 0], dones[:, 0],
                             float(bootstrap[0]), gamma, lam)
        assert np.abs(adv[:, 0] - ref).max() < 1e-6
        assert np.allclose(ret, adv + values)


@pytest.mark.parametrize("layer", ["conv2d", "linear", "lstm_cell",
                                   "attention", "layernorm", "residual_mlp"])
def test_layer_gradients_match_finite_differences(layer):
    """100 random small shapes per layer, 64-bit central FD, rel err 1e-4."""
    rng = np.random.default_rng(fold(42, "gradcheck", layer))
    for _ in range(100):
        if layer == "conv2d":
            n, cin = int(rng.integers(1, 3)), int(rng.integers(1, 4))
            cout, k = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            s, pad = int(rng.integers(1, 3)), int(rng.integers(0, 2))
            h, w = int(rng.integers(k, 8)), int(rng.integers(k, 8))
            x = param64(rng, (n, cin, h, w))
            wt = param64(rng, (cout, cin, k, k))
            b = param64(rng, (cout,))
            fd_gradcheck(lambda x, wt, b: tz.tsum(tz.mul(
                tz.conv2d(x, wt, b, s, pad), tz.conv2d(x, wt, b, s, pad))),
                [x, wt, b])
        elif layer == "linear":
            n, din, dout = (int(rng.integers(1, 5)),
                            int(rng.integers(1, 6)), int(rng.integers(1, 5)))
            x, wt, b = (param64(rng, (n, din)), param64(rng, (din, dout)),
                        param64(rng, (dout,)))
            fd_gradcheck(lambda x, wt, b: tz.tsum(tz.mul(
                linear(x, wt, b), linear(x, wt, b))), [x, wt, b])
        elif layer == "lstm_cell":
            n, d, hd = (int(rng.integers(1, 4)), int(rng.integers(1, 5)),
                        int(rng.integers(1, 4)))
            ts = [param64(rng, (n, d)), param64(rng, (n, hd)),
                  param64(rng, (n, hd)), param64(rng, (d, 4 * hd)),
                  param64(rng, (hd, 4 * hd)), param64(rng, (4 * hd,))]

            def lstm_loss(x, h0, c0, wx, wh, b):
                h1, c1 = lstm_cell(x, h0, c0, wx, wh, b)
                return tz.tsum(tz.add(tz.mul(h1, h1), tz.mul(c1, c1)))

            fd_gradcheck(lstm_loss, ts)
        elif layer == "attention":
            nq, nk = int(rng.integers(1, 5)), int(rng.integers(1, 6))
            d, dv = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            q, k, v = (param64(rng, (nq, d)), param64(rng, (nk, d)),
                       param64(rng, (nk, dv)))

            def attn_loss(q, k, v):
                out, _ = attention(q, k, v)
                return tz.tsum(tz.mul(out, out))

            fd_gradcheck(attn_loss, [q, k, v])
        elif layer == "layernorm":
            n, d = int(rng.integers(1, 5)), int(rng.integers(2, 7))
            x, g, b = (param64(rng, (n, d)), param64(rng, (d,)),
                       param64(rng, (d,)))
            fd_gradcheck(lambda x, g, b: tz.tsum(tz.mul(
                tz.layernorm(x, g, b), tz.layernorm(x, g, b))), [x, g, b])
        else:
            n, d, hd = (int(rng.integers(1, 4)), int(rng.integers(1, 6)),
                        int(rng.integers(1, 8)))
            ts = [param64(rng, (n, d)), param64(rng, (d, hd)),
                  param64(rng, (hd,)), param64(rng, (hd, d)),
                  param64(rng, (d,))]
            fd_gradcheck(lambda *t: tz.tsum(tz.mul(
                residual_mlp(*t), residual_mlp(*t))), ts)


def test_parameter_counts_near_reference_budgets():
    small = param_count(init_params(AgentConfig.default("ppo_cnn"), seed=1))
    large = param_count(init_params(AgentConfig.default("ppo_spcnn"), seed=1))
    assert abs(small - 1e6) / 1e6 <= 0.10, small
    assert abs(large - 134e6) / 134e6 <= 0.05, large


# ---------------------------------------------------------------- attention

def test_attention_maps_row_stochastic():
    for arch in ("oc_sa", "oc_ca"):
        cfg = AgentConfig.default(arch)
        params = init_params(cfg, seed=3)
        out = forward(cfg, params, obs_batch(2, seed=8))
        for amap in list(out.attention) + list(extract_attention(out)):
            rows = amap.weights.sum(axis=-1)
            assert np.abs(rows - 1.0).max() < 1e-6, arch


def test_cross_attention_without_pe_ignores_token_order():
    base = AgentConfig.default("oc_ca")
    nope = apply_ablation(base, ["no_positional_embeddings"])
    params = init_params(base, seed=5)
    obs = obs_batch(1, seed=9)
    rng = np.random.default_rng(13)

    def logits_for(cfg, perm):
        x = agents._prep(obs, params["actor.w"].dtype)
        seq = patch_split(agents._spcnn_map(params, x), 16, 16)
        if perm is not None:
            seq = PatchSequence(tokens=tz.tensor(seq.tokens.data[:, perm, :]),
                                patch=seq.patch, stride=seq.stride,
                                grid=seq.grid)
        tok = agents._project_tokens(cfg, params, seq)
        slots = tz.tile_batch(params["slots"], 1)
        out, _ = agents._attention_block(cfg, params, "ca", slots, tok,
                                         "keys")
        feat = tz.tmean(out, axis=1)
        return agents._heads(params, feat)[0].data

    ref = logits_for(nope, None)
    worst = 0.0
    for _ in range(5):
        diff = np.abs(logits_for(nope, rng.permutation(16)) - ref).max()
        worst = max(worst, diff)
    assert worst < 1e-5, worst
    # control: with positional embeddings the same shuffle moves the logits
    ref_pe = logits_for(base, None)
    moved = np.abs(logits_for(base, rng.permutation(16)) - ref_pe).max()
    assert moved > 1e-5, moved


def test_slot_competition_normalizes_columns_instead():
    cfg = apply_ablation(AgentConfig.default("oc_ca"), ["slot_competition"])
    params = init_params(cfg, seed=3)
    out = forward(cfg, params, obs_batch(2, seed=8))
    cols = out.attention[-1].weights.sum(axis=-2)
    assert np.abs(cols - 1.0).max() < 1e-6


# ---------------------------------------------------------------- tech tree

def test_collect_gates_follow_tool_tiers():
    gates = (("T", "collect_wood", 0), ("#", "collect_stone", 1),
             ("c", "collect_coal", 1), ("i", "collect_iron", 2),
             ("d", "collect_diamond", 3))
    tools = ({}, {"wood_pickaxe": 1},
             {"wood_pickaxe": 1, "stone_pickaxe": 1},
             {"wood_pickaxe": 1, "stone_pickaxe": 1, "iron_pickaxe": 1})
    for ch, ach, need in gates:
        for tier, inv in enumerate(tools):
            s = micro([f".{ch}.", ".P.", "..."], inv=dict(inv))
            step(s, Action.MOVE_UP)
            ev = step(s, Action.DO)
            assert (ach in ev.achievements) == (tier >= need), (ach, tier)


def test_place_recipes_check_costs():
    for wood in range(4):
        s = micro(["...", ".P.", "..."], inv={"wood": wood})
        ev = step(s, Action.PLACE_TABLE)
        assert ("place_table" in ev.achievements) == (wood >= 2), wood
        if wood >= 2:
            assert s.player.inventory["wood"] == wood - 2
    for stone in range(2):
        s = micro(["...", ".P.", "..."], inv={"stone": stone})
        ev = step(s, Action.PLACE_FURNACE)
        assert ("place_furnace" in ev.achievements) == (stone >= 1), stone


def test_make_recipes_check_costs_and_stations():
    for wood, table in itertools.product((0, 1), (False, True)):
        s = micro(["t.." if table else "...", ".P.", "..."],
                  inv={"wood": wood})
        ev = step(s, Action.MAKE_WOOD_PICKAXE)
        want = bool(wood and table)
        assert ("make_wood_pickaxe" in ev.achievements) == want
    for wood, stone, table in itertools.product((0, 1), (0, 1),
                                                (False, True)):
        s = micro(["t.." if table else "...", ".P.", "..."],
                  inv={"wood": wood, "stone": stone})
        ev = step(s, Action.MAKE_STONE_PICKAXE)
        want = bool(wood and stone and table)
        assert ("make_stone_pickaxe" in ev.achievements) == want
    for wood, coal, iron, table, furnace in itertools.product((0, 1),
                                                              repeat=5):
        top = ("t" if table else ".") + "." + ("f" if furnace else ".")
        s = micro([top, ".P.", "..."],
                  inv={"wood": wood, "coal": coal, "iron": iron})
        ev = step(s, Action.MAKE_IRON_PICKAXE)
        want = bool(wood and coal and iron and table and furnace)
        assert ("make_iron_pickaxe" in ev.achievements) == want


def test_tech_tree_chain_unlocks_in_order():
    A = Action
    s = micro(["....", "d...", "#..T", "#.Pi", "..c."])
    script = ([A.MOVE_UP, A.MOVE_RIGHT] + [A.DO] * 6 +
              [A.MOVE_DOWN, A.MOVE_UP, A.PLACE_TABLE, A.MAKE_WOOD_PICKAXE,
               A.MOVE_LEFT, A.DO, A.MAKE_STONE_PICKAXE, A.MOVE_DOWN,
               A.MOVE_LEFT, A.DO, A.MOVE_UP, A.PLACE_FURNACE, A.MOVE_DOWN,
               A.MOVE_RIGHT, A.DO, A.MOVE_DOWN, A.DO, A.MOVE_UP,
               A.MAKE_IRON_PICKAXE, A.MOVE_LEFT, A.MOVE_LEFT, A.MOVE_UP,
               A.DO])
    order, seen = [], set()
    for a in script:
        for ach in sorted(step(s, a).achievements):
            if ach not in seen:
                seen.add(ach)
                order.append(ach)
    assert order == ["collect_wood", "place_table", "make_wood_pickaxe",
                     "collect_stone", "make_stone_pickaxe", "place_furnace",
                     "collect_iron", "collect_coal", "make_iron_pickaxe",
                     "collect_diamond"]
    inv = s.player.inventory
    assert inv["wood"] == 1 and inv["diamond"] == 1
    assert all(inv[f"{t}_pickaxe"] == 1 for t in ("wood", "stone", "iron"))


# ---------------------------------------------------------------- learning

def test_ppo_smoke_learns_collect_wood(tmp_path):
    """Three seeds on a tree-rich 16x16 world reach a 50% collect_wood
    episode rate within 100k steps; the random baseline stays far below.
    Runs in roughly seven minutes on one core."""
    spec = EnvSpec(counts={"tree": 40, "coal": 0, "iron": 0, "cow": 0,
                           "zombie": 0, "skeleton": 0},
                   episode_cap=200, world={"width": 16, "height": 16})
    agent = dataclasses.replace(AgentConfig.default("ppo_cnn"),
                                cnn_channels=(16, 32, 32), fc_dim=128)
    cfg = PPOConfig(total_steps=100_000, n_rollout_steps=2048, n_lanes=8,
                    batch_size=256, n_epochs=4, eval_interval=0)

    def plateau(entry):
        return entry["ep_unlock_rates"].get("collect_wood", 0.0) >= 55.0

    rates = []
    for seed in (101, 202, 303):
        _, report = train(spec, agent, cfg, run_seed=seed,
                          run_dir=str(tmp_path / f"s{seed}"), stop=plateau)
        rates.append(report.entries[-1]["ep_unlock_rates"]
                     .get("collect_wood", 0.0))
    trained = sum(rates) / len(rates)
    _, base_rates, _ = run_episodes(random_policy(7), spec,
                                    n_episodes=60, seed=7)
    baseline = base_rates["collect_wood"]
    assert trained >= 50.0, rates
    assert baseline <= trained - 20.0, (baseline, trained)


# --------------------------------------------------------------- throughput

def test_single_thread_step_throughput():
    env = Env(EnvSpec())
    acts = Stream(99, "throughput")
    env.reset(0)
    busy, steps, next_seed = 0.0, 0, 1
    while steps < 30000:
        a = acts.randint(17)
        t0 = time.perf_counter()
        r = env.step(a)
        busy += time.perf_counter() - t0
        steps += 1
        if r.done:
            env.reset(next_seed)
            next_seed += 1
    rate = steps / busy
    assert rate >= 10_000, f"{rate:.0f} steps/s"


@pytest.mark.skipif(os.cpu_count() < 8,
                    reason="batch scaling is specified for 8 lanes on 8 "
                           f"cores; this host has {os.cpu_count()}, so the "
                           "4x claim cannot be measured here")
def test_batch_stepping_scales_across_lanes():
    spec = EnvSpec()
    solo = Env(spec)
    solo.reset(0)
    acts = Stream(5, "scale")
    n = 4000
    t0 = time.perf_counter()
    for _ in range(n):
        if solo.step(acts.randint(17)).done:
            solo.reset(1)
    solo_rate = n / (time.perf_counter() - t0)
    batch = ProcessBatchEnv(spec, 8, run_seed=0, n_workers=8)
    try:
        batch.reset_all()
        t0 = time.perf_counter()
        for _ in range(n // 8):
            batch.step([acts.randint(17)] * 8)
        batch_rate = n / (time.perf_counter() - t0)
    finally:
        batch.close()
    assert batch_rate >= 4 * solo_rate, (solo_rate, batch_rate)


# ------------------------------------------------------------ live protocol

def _spec_16(tree, cap):
    return EnvSpec(counts={"tree": tree, "coal": 0, "iron": 0, "cow": 0,
                           "zombie": 0, "skeleton": 0},
                   episode_cap=cap, world={"width": 16, "height": 16})


def test_wire_protocol_lockstep_session():
    app = build_app()
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        ws.send_json({"kind": "hello", "spec": _spec_16(30, 150).to_dict(),
                      "seed": 3})
        ack = ws.receive_json()
        frame = ws.receive_json()
        assert ack["kind"] == "hello"
        assert len(ack["actions"]) == 17
        assert len(set(ack["actions"])) == 17
        assert tuple(ack["achievements"]) == ROSTER
        assert tuple(ACHIEVEMENTS) == ROSTER
        assert frame["kind"] == "frame" and frame["t"] == 0
        # 100 lockstep rounds cycling through every action: exactly one
        # frame per act, time advancing by one each round
        for i in range(100):
            ws.send_json({"kind": "act", "name": ack["actions"][i % 17]})
            msg = ws.receive_json()
            assert msg["kind"] == "frame"
            assert msg["t"] == i + 1
            assert not msg["done"]


def plan_unlock_trace(spec, episode_seed):
    """Scripted stand-in for a person: walk to a tree, chop, walk to
    water, drink. Returns the action list or None if the map blocks it."""
    walk = {Material.GRASS, Material.SAND, Material.PATH}
    move_of = {(0, -1): Action.MOVE_UP, (0, 1): Action.MOVE_DOWN,
               (-1, 0): Action.MOVE_LEFT, (1, 0): Action.MOVE_RIGHT}

    def route(state, target):
        start = (state.player.x, state.player.y)
        prev = {start: None}
        queue = deque([start])
        while queue:
            cur = queue.popleft()
            for (dx, dy), mv in move_of.items():
                nx, ny = cur[0] + dx, cur[1] + dy
                if not (0 <= nx < state.width and 0 <= ny < state.height):
                    continue
                mat = state.cell(nx, ny)
                if mat == target:
                    path = [mv]
                    back = cur
                    while prev[back] is not None:
                        back, used = prev[back]
                        path.append(used)
                    return list(reversed(path))
                if mat in walk and (nx, ny) not in prev:
                    prev[(nx, ny)] = (cur, mv)
                    queue.append((nx, ny))
        return None

    env = Env(spec)
    env.reset(episode_seed)
    trace = []
    for target, ach in ((Material.TREE, "collect_wood"),
                        (Material.WATER, "collect_drink")):
        moves = route(env.state, target)
        if moves is None:
            return None
        for mv in moves + [Action.DO]:
            trace.append(mv)
            env.step(mv)
        if ach not in env.ledger.unlocked:
            return None
    return trace


def test_human_session_unlocks_and_scores(tmp_path, capsys):
    spec = _spec_16(60, 40)
    trace = plan_unlock_trace(spec, fold(1, "episode", 0))
    assert trace is not None and len(trace) <= 30
    stats_path = tmp_path / "human.jsonl"
    app = build_app(stats_path=stats_path)
    with TestClient(app) as client, client.websocket_connect("/ws") as ws:
        ws.send_json({"kind": "hello", "spec": spec.to_dict(), "seed": 1})
        ws.receive_json()
        frame = ws.receive_json()
        for act in trace:
            ws.send_json({"kind": "act", "name": act.name.lower()})
            frame = ws.receive_json()
        assert {"collect_wood", "collect_drink"} <= set(frame["unlocked"])
        while not frame["done"]:
            ws.send_json({"kind": "act", "name": "noop"})
            frame = ws.receive_json()
        done = ws.receive_json()
        assert done["kind"] == "done"
        assert {"collect_wood", "collect_drink"} <= set(
            done["episode"]["unlocked"])
    rc = main(["score", str(stats_path)])
    out = capsys.readouterr().out.strip()
    assert rc == 0
    expected = crafter_score([100.0 if a in ("collect_wood", "collect_drink")
                              else 0.0 for a in ACHIEVEMENTS])
    assert out == f"{expected:.1f}"  # the subcommand prints one decimal
