"""Command line entry points.

Subcommands: gen (world census), train, eval, score (recompute the
benchmark score from a stats log), replay (verify a recorded episode),
viz-attn (attention montage from a checkpoint), play (human-play
server), sweep (grid runner over training hyper-parameters).

Exit codes: 0 success, 1 usage, 2 config, 3 runtime failure.
"""

import argparse
import collections
import json
import sys

from .. import agents, ppo
from ..envapi import genparams_for, replay_record, score_from_stats
from ..nnet.checkpoint import CheckpointError
from ..oodconfig import ConfigError
from ..rng import fold
from ..worldgen import GenerationError, count_materials, generate
from . import config as cfgmod


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _sections(args):
    doc = cfgmod.load_config(args.config) if getattr(args, "config", None) else {}
    env = dict(doc.get("env") or {})
    if getattr(args, "preset", None):
        env["preset"] = args.preset
    agent = dict(doc.get("agent") or {})
    if getattr(args, "arch", None):
        agent["architecture"] = args.arch
    ppo_sec = dict(doc.get("ppo") or {})
    for field in ("total_steps", "n_lanes", "learning_rate"):
        value = getattr(args, field, None)
        if value is not None:
            ppo_sec[field] = value
    server = dict(doc.get("server") or {})
    return env, agent, ppo_sec, server


def cmd_gen(args):
    env, _, _, _ = _sections(args)
    spec = cfgmod.build_env_spec(env)
    world, entities = generate(genparams_for(spec, fold(args.seed, "world")))
    mats = {m.name.lower(): c for m, c in count_materials(world).items()}
    ents = collections.Counter(kind for kind, _, _ in entities)
    census = {"seed": args.seed, "materials": mats, "entities": dict(ents)}
    if args.json:
        print(json.dumps(census, indent=2, sort_keys=True))
    else:
        for name in sorted(mats):
            print(f"{name} {mats[name]}")
        for name in sorted(ents):
            print(f"{name} {ents[name]}")
    return 0


def cmd_train(args):
    env, agent, ppo_sec, _ = _sections(args)
    spec = cfgmod.build_env_spec(env)
    agent_cfg = cfgmod.build_agent_config(agent)
    ppo_cfg = cfgmod.build_ppo_config(ppo_sec)
    eval_spec = None
    if args.eval_preset:
        eval_spec = cfgmod.resolve_preset(args.eval_preset)
    log = None if args.quiet else _print_entry
    ppo.train(spec, agent_cfg, ppo_cfg, args.seed, args.run_dir,
              eval_spec=eval_spec, log=log)
    print(f"done: {args.run_dir}/checkpoint_final.npz")
    return 0


def _print_entry(entry):
    bits = [f"update {entry['update']}", f"steps {entry['steps']}",
            f"sps {entry['sps']}"]
    if "ep_reward_mean" in entry:
        bits.append(f"ep_reward {entry['ep_reward_mean']:.2f}")
    if "eval_score" in entry:
        bits.append(f"eval_score {entry['eval_score']:.2f}")
    print("  ".join(bits))


def cmd_eval(args):
    env, _, _, _ = _sections(args)
    spec = cfgmod.build_env_spec(env)
    score, rates, _ = ppo.evaluate(args.checkpoint, spec,
                                   n_episodes=args.episodes, seed=args.seed)
    for name, rate in rates.items():
        print(f"{name:24s} {rate:6.1f}%")
    print(f"score {score:.3f}")
    return 0


def cmd_score(args):
    lines = []
    for path in args.log:
        with open(path) as fh:
            lines.extend(json.loads(line) for line in fh if line.strip())
    if not lines:
        print("no episodes in log", file=sys.stderr)
        return 3
    print(f"{score_from_stats(lines):.1f}")
    return 0


def cmd_replay(args):
    with open(args.record) as fh:
        record = json.load(fh)
    ok, detail = replay_record(record)
    if ok:
        print("OK, byte-exact")
        return 0
    print(f"MISMATCH: {detail}", file=sys.stderr)
    return 3


def cmd_viz_attn(args):
    from . import viz
    env, _, _, _ = _sections(args)
    spec = cfgmod.build_env_spec(env)
    out, n = viz.save_attention_montage(args.checkpoint, spec, args.seed,
                                        args.out, n_steps=args.steps,
                                        every=args.every, scale=args.scale)
    print(f"wrote {out} ({n} columns)")
    return 0


def cmd_play(args):
    import uvicorn
    from .server import build_app
    env, _, _, server = _sections(args)
    spec = cfgmod.build_env_spec(env)
    server = cfgmod.build_server_config(server)
    if args.port is not None:
        server["port"] = args.port
    if args.host:
        server["host"] = args.host
    if args.static is not None:
        server["static_dir"] = args.static
    if args.spectate:
        server["checkpoint"] = args.spectate
    app = build_app(spec=spec, stats_path=server["stats_log"],
                    static_dir=server["static_dir"],
                    checkpoint=server["checkpoint"], seed=server["seed"])
    uvicorn.run(app, host=server["host"], port=int(server["port"]))
    return 0


def cmd_sweep(args):
    env, agent, ppo_sec, _ = _sections(args)
    spec = cfgmod.build_env_spec(env)
    agent_cfg = cfgmod.build_agent_config(agent)
    base = cfgmod.build_ppo_config(ppo_sec)
    grid = {}
    for axis in args.axis:
        if "=" not in axis:
            raise ConfigError(f"bad axis {axis!r}; want name=v1,v2,...")
        name, _, values = axis.partition("=")
        grid[name] = [_coerce(v) for v in values.split(",")]
    results = ppo.sweep(spec, agent_cfg, base, grid, args.seed, args.run_dir)
    for entry in results:
        print(f"{entry['overrides']} -> score {entry['score']:.3f}")
    return 0


def _coerce(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def build_parser():
    p = _Parser(prog="gridcraft",
                description="survival gridworld: training, evaluation, play")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=0):
        sp.add_argument("--config", help="YAML config (env/agent/ppo/server)")
        sp.add_argument("--preset", help="environment preset name")
        sp.add_argument("--seed", type=int, default=seed)

    g = sub.add_parser("gen", help="generate a world, print its census")
    common(g)
    g.add_argument("--json", action="store_true")
    g.set_defaults(fn=cmd_gen)

    t = sub.add_parser("train", help="PPO training run")
    common(t)
    t.add_argument("--run-dir", required=True)
    t.add_argument("--arch", choices=agents.ARCHITECTURES)
    t.add_argument("--total-steps", dest="total_steps", type=int)
    t.add_argument("--n-lanes", dest="n_lanes", type=int)
    t.add_argument("--learning-rate", dest="learning_rate", type=float)
    t.add_argument("--eval-preset")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint over seeded episodes")
    common(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("score", help="recompute the score from stats logs")
    s.add_argument("log", nargs="+")
    s.set_defaults(fn=cmd_score)

    r = sub.add_parser("replay", help="verify a recorded episode byte-exactly")
    r.add_argument("record")
    r.set_defaults(fn=cmd_replay)

    v = sub.add_parser("viz-attn", help="attention montage from a checkpoint")
    common(v)
    v.add_argument("--checkpoint", required=True)
    v.add_argument("--out", default="attention.png")
    v.add_argument("--steps", type=int, default=8)
    v.add_argument("--every", type=int, default=1)
    v.add_argument("--scale", type=int, default=4)
    v.set_defaults(fn=cmd_viz_attn)

    pl = sub.add_parser("play", help="start the human-play server")
    common(pl)
    pl.add_argument("--host")
    pl.add_argument("--port", type=int)
    pl.add_argument("--static", help="directory of browser client assets")
    pl.add_argument("--spectate", help="checkpoint to drive actions")
    pl.set_defaults(fn=cmd_play)

    sw = sub.add_parser("sweep", help="train across a hyper-parameter grid")
    common(sw)
    sw.add_argument("--run-dir", required=True)
    sw.add_argument("--arch", choices=agents.ARCHITECTURES)
    sw.add_argument("--axis", action="append", default=[],
                    help="name=v1,v2,... (repeatable)")
    sw.set_defaults(fn=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return 1
    except SystemExit as exc:  # argparse --help exits 0
        return int(exc.code or 0)
    try:
        return args.fn(args) or 0
    except (ConfigError, CheckpointError,
            agents.UnsupportedArchitectureError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, GenerationError,
            ppo.PPOAbortError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
