#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Runs the hot paths (chain transforms, single-config FK + Jacobian, batched
goal-set projection, DTW accumulation) with both implementations and prints
a timing table. The compiled extension must be built for the comparison;
otherwise only the fallback column is reported.
"""

import time

import numpy as np

from reachplan import _pure, models
from reachplan.sampling import GoalSet, sample_trajectories
from reachplan.trajectory import GOAL_SET, Trajectory, make_control_metric

try:
    from reachplan import _native
except ImportError:
    _native = None


def timeit(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    human = models.load_reference_human()
    packed = (human._kinds, human._axes, human._orot, human._otrans)
    rng = np.random.default_rng(0)
    q_batch = rng.uniform(-0.4, 0.4, (1000, human.m))
    q_one = q_batch[0]
    fr = human.frame("hand")

    n = 100
    met = make_control_metric(n, human.m, 0.01, GOAL_SET, sigma=0.3)
    line = Trajectory(np.linspace(0.0, 1.0, n)[:, None] * q_one, 0.01)
    batch = sample_trajectories(line, met, 20, seed=1)
    goal = GoalSet(np.array([0.4, -0.1, 1.1]))
    wps = np.stack([s.waypoints for s in batch.samples])
    proj_args = (
        *packed,
        human.lower,
        human.upper,
        fr.joint_index,
        fr.offset,
    )
    proj_tail = (met.rfree_inv_last_col, goal.point, 0.01, 1e-3, 800, 1e-8, True)
    cost = rng.uniform(0.0, 1.0, (100, 100))

    cases = {
        "chain_transforms (1000 x 23 DoF)": lambda impl: impl.chain_transforms(*packed, q_batch),
        "frame_state (FK + Jacobian)": lambda impl: [
            impl.frame_state(*packed, q, fr.joint_index, fr.offset) for q in q_batch[:200]
        ],
        "project_goal (20 samples, N=100)": lambda impl: impl.project_goal(
            *proj_args, wps.copy(), *proj_tail
        ),
        "dtw_accumulate (100 x 100)": lambda impl: impl.dtw_accumulate(cost),
    }

    header = f"{'kernel':<36}{'pure (ms)':>12}{'native (ms)':>14}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, fn in cases.items():
        t_pure = timeit(lambda: fn(_pure)) * 1e3
        if _native is not None:
            t_native = timeit(lambda: fn(_native)) * 1e3
            print(f"{name:<36}{t_pure:>12.2f}{t_native:>14.2f}{t_pure / t_native:>9.1f}x")
        else:
            print(f"{name:<36}{t_pure:>12.2f}{'n/a':>14}{'n/a':>10}")


if __name__ == "__main__":
    main()
