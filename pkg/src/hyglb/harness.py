"""Simulated environment, seeded sweep execution, and result persistence.

Sweeps are grids of cells (generator parameters plus a cost ratio).  Within a
cell every algorithm mode sees the same instance and the same per-run
environment seed, so modes are compared on identical observation draws for
identical query prefixes; algorithm-internal randomness (exploration coin,
uniform draws) uses a separate stream keyed additionally by the mode.  All
seeds derive from numpy SeedSequence chains, so reruns of a spec reproduce
the results table exactly (the wallclock_ms column is measured and therefore
excluded from the determinism contract).
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import glm
from .explore import MODES, AlgoConfig, RunResult, run
from .problem import (
    HybridInstance,
    InstanceView,
    best_arm_and_gaps,
    gen_appendix_d_case,
    gen_basis_rotated,
    gen_main_instance,
    gaussian_toy_1d,
    instance_digest,
)

RESULT_COLUMNS = [
    "generator",
    "d",
    "K",
    "S",
    "cost_reward",
    "cost_dueling",
    "mode",
    "seed",
    "tau",
    "total_cost",
    "reward_cost",
    "dueling_cost",
    "recommended",
    "correct",
    "converged",
    "wallclock_ms",
]

SUMMARY_COLUMNS = [
    "generator",
    "d",
    "K",
    "S",
    "cost_reward",
    "cost_dueling",
    "mode",
    "runs",
    "tau_mean",
    "tau_std",
    "tau_min",
    "tau_max",
    "cost_mean",
    "reward_cost_mean",
    "dueling_cost_mean",
    "error_rate",
    "n_nonconverged",
]


class Environment:
    """Owns the full instance (with theta_star) and the observation stream."""

    def __init__(self, instance: HybridInstance, rng):
        self.instance = instance
        self.view: InstanceView = instance.view()
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(rng)
        elif isinstance(rng, np.random.SeedSequence):
            rng = np.random.default_rng(rng)
        self.rng = rng
        self._eta = self.view.feats @ instance.theta_star
        self._i_star = best_arm_and_gaps(instance)[0]

    def observe(self, action) -> float:
        idx = self.view.action_index(action)
        fam = self.view.family_of(action)
        return glm.sample(fam, float(self._eta[idx]), self.rng)

    def best_arm(self) -> int:
        return self._i_star


def observe(env: Environment, action) -> float:
    return env.observe(action)


def make_instance(generator: str, *, K=None, d=None, S=None, case=None, rng=None):
    """Instance factory shared by the harness and the CLI."""
    if generator == "main":
        if rng is None:
            raise ValueError("generator 'main' needs an rng")
        K = int(K) if K is not None else int(d) + 1
        return gen_main_instance(K, int(d), float(S), rng)
    if generator == "basis_rotated":
        return gen_basis_rotated(int(d), float(S))
    if generator == "appendix_d_case":
        return gen_appendix_d_case(int(case), float(S) if S is not None else 5.0)
    if generator == "gaussian_toy_1d":
        return gaussian_toy_1d()
    raise ValueError(f"unknown generator {generator!r}")


@dataclass(frozen=True)
class Cell:
    index: int
    generator: str
    d: int
    K: int
    S: float
    cost_reward: float
    cost_dueling: float
    case: int | None = None


@dataclass
class SweepSpec:
    generator: str
    modes: list[str]
    runs: int
    base_seed: int
    delta: float
    d: list[int] = field(default_factory=lambda: [2])
    K: list[int] | None = None
    S: list[float] = field(default_factory=lambda: [5.0])
    cost_ratios: list[tuple[float, float]] = field(default_factory=lambda: [(1.0, 1.0)])
    case: int | None = None
    alpha: float = 0.5
    max_rounds: int = 5_000_000

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}")

    def cells(self) -> list[Cell]:
        """Cartesian grid in deterministic order.  Cost ratios (a, b) are
        normalized so C_reward + C_dueling = 2 with C_reward/C_dueling = a/b."""
        out = []
        idx = 0
        for d in self.d:
            ks = self.K if self.K is not None else [d + 1]
            for K in ks:
                for S in self.S:
                    for ratio in self.cost_ratios:
                        a, b = float(ratio[0]), float(ratio[1])
                        cr = 2.0 * a / (a + b)
                        cd = 2.0 * b / (a + b)
                        out.append(
                            Cell(idx, self.generator, int(d), int(K), float(S), cr, cd, self.case)
                        )
                        idx += 1
        return out

    def to_json(self) -> dict:
        return {
            "generator": self.generator,
            "modes": list(self.modes),
            "runs": self.runs,
            "base_seed": self.base_seed,
            "delta": self.delta,
            "d": list(self.d),
            "K": list(self.K) if self.K is not None else None,
            "S": list(self.S),
            "cost_ratios": [list(r) for r in self.cost_ratios],
            "case": self.case,
            "alpha": self.alpha,
            "max_rounds": self.max_rounds,
        }


def cell_instance(spec: SweepSpec, cell: Cell) -> HybridInstance:
    """One instance per cell, shared by every mode and run in the cell."""
    ss = np.random.SeedSequence([int(spec.base_seed), 0, cell.index])
    rng = np.random.default_rng(ss)
    base = make_instance(
        cell.generator, K=cell.K, d=cell.d, S=cell.S, case=cell.case, rng=rng
    )
    return base.with_costs(cell.cost_reward, cell.cost_dueling)


def env_seed(spec: SweepSpec, cell: Cell, run_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(spec.base_seed), 1, cell.index, run_index])


def algo_seed(
    spec: SweepSpec, cell: Cell, run_index: int, mode: str
) -> np.random.SeedSequence:
    mode_id = MODES.index(mode)
    return np.random.SeedSequence(
        [int(spec.base_seed), 2, cell.index, run_index, mode_id]
    )


def _run_one(spec: SweepSpec, cell: Cell, instance, run_index: int, mode: str) -> dict:
    env = Environment(instance, np.random.default_rng(env_seed(spec, cell, run_index)))
    algo_rng = np.random.default_rng(algo_seed(spec, cell, run_index, mode))
    config = AlgoConfig(
        delta=spec.delta, alpha=spec.alpha, mode=mode, max_rounds=spec.max_rounds
    )
    t0 = time.perf_counter()
    try:
        result: RunResult = run(env, config, algo_rng)
        wall = (time.perf_counter() - t0) * 1000.0
        row = {
            "generator": cell.generator,
            "d": cell.d,
            "K": cell.K,
            "S": cell.S,
            "cost_reward": cell.cost_reward,
            "cost_dueling": cell.cost_dueling,
            "mode": mode,
            "seed": run_index,
            "tau": result.tau,
            "total_cost": result.total_cost,
            "reward_cost": result.reward_cost,
            "dueling_cost": result.dueling_cost,
            "recommended": result.recommended,
            "correct": result.correct,
            "converged": result.converged,
            "wallclock_ms": wall,
        }
    except Exception as exc:  # failures become rows, never abort the sweep
        wall = (time.perf_counter() - t0) * 1000.0
        row = {
            "generator": cell.generator,
            "d": cell.d,
            "K": cell.K,
            "S": cell.S,
            "cost_reward": cell.cost_reward,
            "cost_dueling": cell.cost_dueling,
            "mode": mode,
            "seed": run_index,
            "tau": -1,
            "total_cost": math.nan,
            "reward_cost": math.nan,
            "dueling_cost": math.nan,
            "recommended": -1,
            "correct": False,
            "converged": False,
            "wallclock_ms": wall,
            "error": repr(exc),
        }
    return row


def _task(args):
    return _run_one(*args)


def execute_sweep(spec: SweepSpec, jobs: int = 1) -> list[dict]:
    """Run every (cell, mode, run) combination; rows come back in canonical
    order regardless of scheduling."""
    tasks = []
    for cell in spec.cells():
        instance = cell_instance(spec, cell)
        for run_index in range(spec.runs):
            for mode in spec.modes:
                tasks.append((spec, cell, instance, run_index, mode))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_task, tasks))
    else:
        rows = [_task(t) for t in tasks]
    keyed = sorted(
        rows,
        key=lambda r: (
            r["generator"],
            r["d"],
            r["K"],
            r["S"],
            r["cost_reward"],
            r["mode"],
            r["seed"],
        ),
    )
    return keyed


def aggregate(rows: list[dict]) -> list[dict]:
    """Per (cell, mode) summary of stopping time, cost split, and errors."""
    if not rows:
        raise ValueError("no rows to aggregate")
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        key = (
            r["generator"],
            r["d"],
            r["K"],
            r["S"],
            r["cost_reward"],
            r["cost_dueling"],
            r["mode"],
        )
        groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups):
        rs = groups[key]
        taus = np.array([r["tau"] for r in rs], dtype=float)
        out.append(
            {
                "generator": key[0],
                "d": key[1],
                "K": key[2],
                "S": key[3],
                "cost_reward": key[4],
                "cost_dueling": key[5],
                "mode": key[6],
                "runs": len(rs),
                "tau_mean": float(taus.mean()),
                "tau_std": float(taus.std()),
                "tau_min": float(taus.min()),
                "tau_max": float(taus.max()),
                "cost_mean": float(np.mean([r["total_cost"] for r in rs])),
                "reward_cost_mean": float(np.mean([r["reward_cost"] for r in rs])),
                "dueling_cost_mean": float(np.mean([r["dueling_cost"] for r in rs])),
                "error_rate": float(np.mean([0.0 if r["correct"] else 1.0 for r in rs])),
                "n_nonconverged": int(sum(0 if r["converged"] else 1 for r in rs)),
            }
        )
    return out


def _csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell_repr(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _cell_repr(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return int(v)
    return v


def write_results_csv(rows: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write(_csv_text(RESULT_COLUMNS, rows))


def write_summary_csv(summary: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write(_csv_text(SUMMARY_COLUMNS, summary))


def write_manifest(spec: SweepSpec, path) -> None:
    doc = spec.to_json()
    doc["cells"] = [
        {
            "index": c.index,
            "generator": c.generator,
            "d": c.d,
            "K": c.K,
            "S": c.S,
            "cost_reward": c.cost_reward,
            "cost_dueling": c.cost_dueling,
            "instance_digest": instance_digest(cell_instance(spec, c)),
        }
        for c in spec.cells()
    ]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
