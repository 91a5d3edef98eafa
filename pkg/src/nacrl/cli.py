"""Command-line surface: expert, gen-demos, train, eval, play."""

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import agents, demos, harness
from .envs import ConfigError, GridMap, GridNav, TrackSim, make_env
from .models import NumericError, load_checkpoint

HP_FIELDS = [f.name for f in dataclasses.fields(harness.HyperParams)]


def _add_hp_flags(parser):
    parser.add_argument("--config", help="key = value config file")
    for name in HP_FIELDS:
        parser.add_argument(f"--{name.replace('_', '-')}", dest=f"hp_{name}",
                            metavar="V", help=argparse.SUPPRESS)


def _add_env_flags(parser):
    parser.add_argument("--env", required=True, choices=["gridnav", "tracksim"])
    parser.add_argument("--map", help="grid map file (gridnav only)")
    parser.add_argument("--track-reward", choices=["lane", "speed2"], default="lane")
    parser.add_argument("--track-abs-sin", action="store_true",
                        help="use |sin theta| in the lane reward")


def build_env(args):
    if args.env == "gridnav":
        grid = GridMap.from_file(args.map) if args.map else None
        return GridNav(grid_map=grid)
    return TrackSim(reward_mode=args.track_reward, abs_sin=args.track_abs_sin)


def resolve_hp(args):
    overrides = {name: getattr(args, f"hp_{name}") for name in HP_FIELDS}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return harness.parse_config(args.config, overrides, env_id=args.env)


def cmd_expert(args):
    env = build_env(args)
    hp = resolve_hp(args)
    os.makedirs(args.out, exist_ok=True)
    model, metrics = harness.train_expert(env, hp, out_dir=args.out)
    last = metrics[-1]
    print(f"expert trained: eval return {last.mean_return:.6g} "
          f"(checkpoint {os.path.join(args.out, 'model.nacq')})")
    return 0


def cmd_gen_demos(args):
    env = build_env(args)
    if args.expert == "longpath":
        if args.env != "gridnav":
            raise ConfigError("the longpath expert only exists for gridnav")
        expert = demos.longpath_expert(env.map)
    else:
        expert, _ = load_checkpoint(args.expert)
    rng = np.random.default_rng(args.seed)
    corpus = demos.generate_demos(expert, env, args.n, args.epsilon,
                                  args.corruption_p, rng, seed_label=args.seed)
    demos.write_corpus(corpus, args.out)
    stats = demos.corpus_stats(corpus)
    print(f"wrote {stats.n_transitions} transitions / {stats.n_episodes} episodes "
          f"to {args.out} (mean return {stats.mean_return:.6g}, "
          f"corrupted {stats.corrupted_fraction:.3f})")
    return 0


def cmd_train(args):
    env = build_env(args)
    hp = resolve_hp(args)
    corpus = demos.read_corpus(args.demos) if args.demos else None
    os.makedirs(args.out, exist_ok=True)
    _, metrics = harness.run_training(args.algo, env, corpus, hp,
                                      out_dir=args.out, corpus_path=args.demos)
    last = metrics[-1]
    print(f"{args.algo} finished at step {last.step}: "
          f"eval return {last.mean_return:.6g} +/- {last.std_return:.6g}")
    return 0


def cmd_eval(args):
    env = build_env(args)
    model, header = load_checkpoint(args.checkpoint)
    mean, std = harness.evaluate_policy(model, env, args.episodes, seed=args.seed or 0)
    print(f"{mean:.6g} {std:.6g}")
    return 0


def cmd_play(args):
    env = build_env(args)
    keymap = demos.default_keymap(env)

    def render(e, obs):
        if e.env_id == "gridnav":
            r, c = divmod(obs, e.map.width)
            for i, row in enumerate(e.map.rows):
                line = "".join("A" if (i, j) == (r, c) else row[j]
                               for j in range(e.map.width))
                print(line)
            print()
        else:
            s = e.state
            print(f"p={s.p:7.2f} d={s.d:+5.2f} theta={s.theta:+5.2f} v={s.v:5.2f}")

    def read_key():
        try:
            line = input(f"move {sorted(keymap)} (Q quits)> ")
        except EOFError:
            return "Q"
        return line.strip()[:1] or "Q"

    corpus = demos.record_interactive(env, keymap, args.out, input_fn=read_key,
                                      render_fn=render, seed_label=args.seed or 0)
    print(f"recorded {len(corpus)} transitions to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="nacrl",
                                     description="actor-critic learning from demonstrations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expert", help="train a soft-Q expert from scratch")
    _add_env_flags(p)
    _add_hp_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_expert)

    p = sub.add_parser("gen-demos", help="roll demonstrations from an expert")
    _add_env_flags(p)
    p.add_argument("--expert", required=True,
                   help="checkpoint path, or 'longpath' for the scripted gridnav expert")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--corruption-p", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_demos)

    p = sub.add_parser("train", help="run the two-phase training loop")
    p.add_argument("--algo", required=True, choices=list(agents.AGENT_KINDS))
    _add_env_flags(p)
    _add_hp_flags(p)
    p.add_argument("--demos", help="demonstration corpus path")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    _add_env_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("play", help="record demonstrations interactively")
    _add_env_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_play)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, demos.CorpusFormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
