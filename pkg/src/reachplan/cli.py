"""Command-line entry points.

Exit codes: 0 success, 1 usage / missing files, 2 numerical failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace

import numpy as np

from .evaluation import aggregate_scores  # noqa: F401  (re-exported for scripts)
from .experiment import (
    REPLAN,
    SINGLE_SHOT,
    cmd_eval,
    cmd_learn,
    cmd_predict,
    cmd_synth_demos,
    load_experiment_spec,
)
from .features import exact_signed_distance
from .fileio import atomic_write_text, load_model, load_scene, load_trajectory
from .kinematics import forward_kinematics, sphere_centers
from .planner import PlanningError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

logger = logging.getLogger("reachplan")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reachplan")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for batch work")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-demos", help="plan demonstrations under the spec's w_true")
    p.add_argument("--spec", required=True)

    p = sub.add_parser("learn", help="build the IOC dataset and learn feature weights")
    p.add_argument("--spec", required=True)
    p.add_argument("--leave-out", type=int, default=None, help="demo index excluded from training")
    p.add_argument("--cross-validate", action="store_true", help="pick the L1 strength by k-fold CV")
    p.add_argument("--no-cache", action="store_true", help="ignore and do not write the dataset cache")
    p.add_argument("--out", default=None, help="weight file path")

    p = sub.add_parser("predict", help="predict motions for (held-out) demonstrations")
    p.add_argument("--spec", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--mode", choices=(SINGLE_SHOT, REPLAN), default=SINGLE_SHOT)
    p.add_argument("--leave-out", type=int, default=None, help="predict only this demo index")
    p.add_argument("--repeats", type=int, default=1, help="stochastic repetitions per case")

    p = sub.add_parser("eval", help="score predictions against observations")
    p.add_argument("--pred", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="run a trajectory through the kinematics and export the frame path")
    p.add_argument("--model", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--frame", default="hand")
    p.add_argument("--scene", default=None, help="also report static-obstacle clearance")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    return parser


def _cmd_replay(args) -> int:
    model = load_model(args.model)
    traj = load_trajectory(args.trajectory)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t", "x", "y", "z", "qw", "qx", "qy", "qz"])
    for i, q in enumerate(traj.waypoints):
        pose = forward_kinematics(model, q, args.frame)
        writer.writerow(
            [repr(i * traj.dt)] + [repr(float(v)) for v in (*pose.position, *pose.quaternion)]
        )
    if args.out:
        atomic_write_text(args.out, out.getvalue())
    else:
        sys.stdout.write(out.getvalue())
    if args.scene:
        scene = load_scene(args.scene)
        if scene.obstacles and model.spheres:
            centers = sphere_centers(model, traj.waypoints).reshape(-1, 3)
            sd = exact_signed_distance(scene.obstacles, centers)
            clearance = sd - np.tile(model.sphere_radii, traj.n)
            print(f"min static clearance: {clearance.min():.4f} m", file=sys.stderr)
            if clearance.min() < 0.0:
                print("trajectory collides with static obstacles", file=sys.stderr)
                return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        if args.command == "synth-demos":
            spec = load_experiment_spec(args.spec)
            paths = cmd_synth_demos(spec)
            for p in paths:
                print(p)
        elif args.command == "learn":
            spec = load_experiment_spec(args.spec)
            spec.ioc = replace(spec.ioc, threads=args.threads)
            out = cmd_learn(
                spec,
                leave_out=args.leave_out,
                cross_validate=args.cross_validate,
                use_cache=not args.no_cache,
                out_path=args.out,
            )
            print(out)
        elif args.command == "predict":
            spec = load_experiment_spec(args.spec)
            paths, failures = cmd_predict(
                spec,
                args.weights,
                mode=args.mode,
                leave_out=args.leave_out,
                repeats=args.repeats,
            )
            for p in paths:
                print(p)
            if failures:
                return EXIT_NUMERICAL
        elif args.command == "eval":
            out = cmd_eval(args.pred, args.obs, args.model, args.out)
            print(out)
        elif args.command == "replay":
            return _cmd_replay(args)
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PlanningError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
