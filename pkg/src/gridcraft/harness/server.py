"""Live-play WebSocket server.

Wire protocol, version 1. JSON text messages over a websocket at /ws;
every message carries a "kind" field:

  client -> server
    hello  {preset?, spec?, seed?, session?}   start/restart an episode,
           or reattach to a paused session by id (no reset on reattach)
    act    {name}                              one environment step
    stats  {}                                  request session aggregate

  server -> client
    hello  {protocol, session, mode, actions, achievements, spec}
    frame  {t, pixels(base64 raw bytes), shape, dtype, vitals,
            unlocked, reward, score, done, resend?}
    stats  {episodes, rates, score}
    done   {episode{length, reward, unlocked}, score}
    error  {detail}                            session is preserved

Lockstep: the server emits exactly one frame per applied act plus one
frame per reset; reattaching resends the last frame flagged resend, which
counts toward neither side. Finished episodes append to the same
stats-log schema agent runs use, so human and agent logs score with the
same subcommand.

In spectate mode (server started with a checkpoint) the loaded policy
picks every action; the client's act messages still carry a valid action
name but only pace the episode.
"""

import base64
import uuid

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .. import agents
from ..envapi import Env, StatsLogger
from ..nnet import autodiff as tz
from ..nnet.checkpoint import load_checkpoint
from ..oodconfig import NUM_PRESETS, ConfigError, EnvSpec, builtin_presets
from ..ppo import AgentPolicy
from ..rng import fold
from ..scoring import ACHIEVEMENTS, crafter_score
from ..simcore import Action
from .config import resolve_preset

PROTOCOL_VERSION = 1
ACTION_NAMES = tuple(a.name.lower() for a in Action)
ACTION_IDS = {name: i for i, name in enumerate(ACTION_NAMES)}


class PlaySession:
    """One environment owned by one controlling client at a time."""

    def __init__(self, sid, spec, seed, rules, stats, policy=None):
        self.sid = sid
        self.spec = spec
        self.seed = seed
        self.env = Env(spec, rules=rules, stats=stats)
        self.policy = policy
        self.mode = "spectate" if policy else "human"
        self.episode_idx = -1
        self.step_idx = 0
        self.done = True
        self.connected = True
        self.history = []        # unlocked sets of finished episodes
        self.live_unlocked = set()
        self.last_frame = None
        self.obs = None

    def begin_episode(self):
        self.episode_idx += 1
        self.step_idx = 0
        self.done = False
        self.live_unlocked = set()
        if self.policy is not None:
            self.policy.reset()
        self.obs = self.env.reset(fold(self.seed, "episode",
                                       self.episode_idx))
        return self.obs

    def score(self):
        """Running estimate: finished episodes plus the live one."""
        sets = self.history + [self.live_unlocked]
        n = len(sets)
        rates = [100.0 * sum(a in s for s in sets) / n for a in ACHIEVEMENTS]
        return crafter_score(rates)

    def rates(self):
        sets = self.history + [self.live_unlocked]
        n = len(sets)
        return {a: 100.0 * sum(a in s for s in sets) / n for a in ACHIEVEMENTS}


def _frame_payload(session, obs, reward=0.0, done=False):
    player = session.env.state.player
    payload = {
        "kind": "frame",
        "t": session.step_idx,
        "pixels": base64.b64encode(obs.tobytes()).decode("ascii"),
        "shape": list(obs.shape),
        "dtype": str(obs.dtype),
        "vitals": {"health": player.health, "food": player.food,
                   "drink": player.water, "energy": player.energy},
        "unlocked": [a for a in ACHIEVEMENTS if a in session.live_unlocked],
        "reward": reward,
        "score": session.score(),
        "done": done,
    }
    session.last_frame = payload
    return payload


def build_app(spec=None, rules=None, stats_path=None, static_dir=None,
              checkpoint=None, seed=0):
    """Assemble the FastAPI app. Each websocket drives its own session;
    paused sessions (disconnects) stay resumable by id for the lifetime
    of the process."""
    default_spec = spec if spec is not None else EnvSpec()
    stats = StatsLogger(stats_path) if stats_path else None
    policy_source = None
    if checkpoint:
        ck = load_checkpoint(checkpoint)
        cfg = agents.AgentConfig.from_dict(ck.config["agent"])
        params = {k: tz.parameter(v) for k, v in ck.params.items()}
        policy_source = (cfg, params)

    app = FastAPI()
    sessions = {}

    def make_policy(sid):
        if policy_source is None:
            return None
        cfg, params = policy_source
        return AgentPolicy(cfg, params, fold(seed, sid, "policy"))

    @app.get("/presets")
    def presets():
        return {"numbers": sorted(NUM_PRESETS),
                "scenarios": sorted(builtin_presets())}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session = None

        async def send(payload):
            await ws.send_json(payload)

        async def fail(detail):
            await send({"kind": "error", "detail": detail})

        try:
            while True:
                try:
                    msg = await ws.receive_json()
                except WebSocketDisconnect:
                    raise
                except Exception:
                    await fail("malformed message: not a JSON object")
                    continue
                if not isinstance(msg, dict) or "kind" not in msg:
                    await fail("malformed message: missing kind")
                    continue
                kind = msg["kind"]

                if kind == "hello":
                    if "session" in msg:  # reattach, no reset
                        other = sessions.get(msg["session"])
                        if other is None:
                            await fail(f"no session {msg['session']!r}")
                            continue
                        if other.connected:
                            await fail("session already has a controller")
                            continue
                        other.connected = True
                        session = other
                        await send(_hello_payload(session))
                        if session.last_frame is not None:
                            await send(dict(session.last_frame, resend=True))
                        continue
                    fresh_spec = "preset" in msg or "spec" in msg
                    if session is None or fresh_spec:
                        try:
                            use = _resolve_spec(msg, default_spec)
                        except ConfigError as err:
                            await fail(str(err))
                            continue
                        if session is not None:
                            session.connected = False
                        sid = uuid.uuid4().hex[:12]
                        # an explicit hello seed pins the episode worlds so
                        # sessions are replayable; anonymous sessions get
                        # decorrelated via the session id instead
                        use_seed = (int(msg["seed"]) if "seed" in msg
                                    else fold(seed, sid))
                        session = PlaySession(sid, use, use_seed,
                                              rules, stats, make_policy(sid))
                        sessions[sid] = session
                    obs = session.begin_episode()
                    await send(_hello_payload(session))
                    await send(_frame_payload(session, obs))

                elif kind == "act":
                    if session is None:
                        await fail("hello first")
                        continue
                    if session.done:
                        await fail("episode finished; send hello for a new one")
                        continue
                    name = msg.get("name")
                    if name not in ACTION_IDS:
                        await fail(f"unknown action {name!r}")
                        continue
                    if session.policy is not None:
                        action = session.policy(session.obs)
                    else:
                        action = ACTION_IDS[name]
                    result = session.env.step(action)
                    session.obs = result.observation
                    session.step_idx += 1
                    session.live_unlocked |= result.info["achievements"]
                    await send(_frame_payload(session, result.observation,
                                              result.reward, result.done))
                    if result.done:
                        session.done = True
                        ep = result.info["episode"]
                        session.history.append(set(ep["unlocked"]))
                        session.live_unlocked = set()
                        await send({"kind": "done",
                                    "episode": {
                                        "length": ep["length"],
                                        "reward": ep["reward"],
                                        "unlocked": [a for a in ACHIEVEMENTS
                                                     if a in ep["unlocked"]]},
                                    "score": session.score()})

                elif kind == "stats":
                    if session is None:
                        await fail("hello first")
                        continue
                    await send({"kind": "stats",
                                "episodes": len(session.history),
                                "rates": session.rates(),
                                "score": session.score()})

                else:
                    await fail(f"unknown kind {kind!r}")
        except WebSocketDisconnect:
            if session is not None:
                session.connected = False  # paused, resumable by id

    if static_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True))
    return app


def _hello_payload(session):
    return {"kind": "hello", "protocol": PROTOCOL_VERSION,
            "session": session.sid, "mode": session.mode,
            "actions": list(ACTION_NAMES),
            "achievements": list(ACHIEVEMENTS),
            "spec": session.spec.to_dict()}


def _resolve_spec(msg, default_spec):
    if "preset" in msg:
        return resolve_preset(msg["preset"])
    if "spec" in msg:
        try:
            return EnvSpec.from_dict(msg["spec"])
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigError(f"bad spec payload: {err}")
    return default_spec
