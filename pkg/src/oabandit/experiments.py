"""Monte-Carlo harness: runs grids of (policy, fusion mode, fault rate)
cells over shared per-run environments, aggregates regret and estimation
error, and persists plot-ready CSVs."""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from .efe import EvolutionaryPrior
from .episode import CommSchedule, run_episode
from .model import generate_environment
from .policies import make_policy

__all__ = [
    "ExperimentConfig",
    "Cell",
    "CellResult",
    "ResultTable",
    "PRESETS",
    "preset_config",
    "run_mc",
    "emit_csv",
    "load_table",
    "summarize",
    "paired_less",
]

OUT_DIR_ENV_VAR = "OABANDIT_OUT"

_Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class ExperimentConfig:
    k: int = 5
    c: int = 3
    f: int = 4
    f_p: int = 1
    horizon: int = 100
    mc_runs: int = 100
    policies: tuple[str, ...] = ("aif", "ts")
    fusion_modes: tuple[str, ...] = ("no_human", "naive")
    fp_rates: tuple[float, ...] = (0.0,)
    downlink_interval: int = 4
    uplink_delay: int = 2
    epsilon: float = 0.25
    p_ev_preferred: float = 1.0
    p_ev_nonpreferred: float = 0.01
    reduction_threshold: int = 10
    base_seed: int = 20240
    prior_mean: float = 0.5
    prior_var: float = 1.0
    out_dir: str | None = None

    def __post_init__(self):
        for name in ("k", "c", "f", "horizon", "mc_runs", "downlink_interval",
                     "reduction_threshold"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive count")
        if any(not 0.0 <= fp <= 1.0 for fp in self.fp_rates):
            raise ValueError("fp_rates must lie in [0, 1]")
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "fusion_modes", tuple(self.fusion_modes))
        object.__setattr__(self, "fp_rates", tuple(float(v) for v in self.fp_rates))

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("config file must hold a flat JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["policies"] = list(self.policies)
        doc["fusion_modes"] = list(self.fusion_modes)
        doc["fp_rates"] = list(self.fp_rates)
        return doc

    def evolutionary_prior(self) -> EvolutionaryPrior:
        return EvolutionaryPrior.peaked(
            self.f, self.f_p, self.p_ev_preferred, self.p_ev_nonpreferred
        )

    def schedule(self) -> CommSchedule:
        return CommSchedule(self.downlink_interval, self.uplink_delay)


PRESETS: dict[str, ExperimentConfig] = {
    "fig4": ExperimentConfig(
        policies=("aif", "ts", "ucb", "egreedy", "oracle"),
        fusion_modes=("no_human", "naive"),
        fp_rates=(0.0,),
    ),
    "fig6": ExperimentConfig(
        policies=("aif", "ts"),
        fusion_modes=("no_human", "naive", "psda"),
        fp_rates=(0.2, 0.4, 0.6),
    ),
    "hard": ExperimentConfig(
        k=15,
        c=3,
        f=12,
        policies=("aif", "ts", "ucb", "egreedy", "oracle"),
        fusion_modes=("no_human", "naive"),
        fp_rates=(0.0,),
    ),
    "asymptotic": ExperimentConfig(
        horizon=1000,
        mc_runs=1000,
        policies=("aif", "ts"),
        fusion_modes=("naive",),
        fp_rates=(0.0,),
    ),
}


def preset_config(name: str, overrides: dict | None = None) -> ExperimentConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    cfg = PRESETS[name]
    if overrides:
        unknown = set(overrides) - set(ExperimentConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **overrides)
    return cfg


@dataclass(frozen=True)
class Cell:
    policy: str
    fusion_mode: str
    fp_rate: float

    @property
    def cell_id(self) -> str:
        return f"{self.policy}:{self.fusion_mode}:{self.fp_rate!r}"

    @classmethod
    def from_id(cls, cell_id: str) -> "Cell":
        policy, mode, fp = cell_id.split(":")
        return cls(policy, mode, float(fp))

    def canonical(self) -> "Cell":
        # without an external observer the fault rate is irrelevant
        if self.fusion_mode == "no_human":
            return Cell(self.policy, self.fusion_mode, 0.0)
        return self


@dataclass
class CellResult:
    cell: Cell
    regret: np.ndarray  # (runs, horizon) cumulative regret per run
    belief_error: np.ndarray  # (runs, horizon)

    @property
    def mean_regret(self) -> np.ndarray:
        return self.regret.mean(axis=0)

    @property
    def final_regrets(self) -> np.ndarray:
        return self.regret[:, -1]

    @property
    def final_belief_errors(self) -> np.ndarray:
        return self.belief_error[:, -1]

    def regret_ci95(self) -> tuple[np.ndarray, np.ndarray]:
        hw = _Z95 * self.regret.std(axis=0, ddof=1) / np.sqrt(self.regret.shape[0])
        mean = self.mean_regret
        return mean - hw, mean + hw


@dataclass
class ResultTable:
    config: ExperimentConfig
    cells: dict[Cell, CellResult] = field(default_factory=dict)

    def result(self, policy: str, fusion_mode: str, fp_rate: float = 0.0) -> CellResult:
        return self.cells[Cell(policy, fusion_mode, float(fp_rate))]


def _run_one(config: ExperimentConfig, run: int, cell: Cell):
    env = generate_environment(config.k, config.c, config.f, config.f_p,
                               seed=config.base_seed + run)
    policy = make_policy(
        cell.policy, env, epsilon=config.epsilon, ev=config.evolutionary_prior()
    )
    trajectory = run_episode(
        env,
        policy,
        cell.fusion_mode,
        config.schedule(),
        config.horizon,
        seed=(config.base_seed, run),
        fp_rate=cell.fp_rate,
        reduction_threshold=config.reduction_threshold,
        prior_mean=config.prior_mean,
        prior_var=config.prior_var,
    )
    return trajectory.regret_curve(), trajectory.belief_error_curve()


def _task(args):
    config, run, cell = args
    return _run_one(config, run, cell)


def run_mc(config: ExperimentConfig, workers: int | None = 1) -> ResultTable:
    """Run every (policy, fusion_mode, fp_rate) cell for mc_runs episodes.

    Run r of every cell shares one environment (seed base_seed + r) and one
    episode seed, so per-run differences across cells isolate the policy and
    fusion method. Results do not depend on the worker count.
    """
    cells = [
        Cell(p, m, fp)
        for p in config.policies
        for m in config.fusion_modes
        for fp in config.fp_rates
    ]
    canonicals = sorted({c.canonical() for c in cells},
                        key=lambda c: (c.policy, c.fusion_mode, c.fp_rate))
    tasks = [(config, run, cell) for cell in canonicals for run in range(config.mc_runs)]

    if workers is not None and workers <= 1:
        outputs = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_task, tasks, chunksize=4))

    by_canonical: dict[Cell, CellResult] = {}
    idx = 0
    for cell in canonicals:
        regret = np.stack([outputs[idx + r][0] for r in range(config.mc_runs)])
        err = np.stack([outputs[idx + r][1] for r in range(config.mc_runs)])
        idx += config.mc_runs
        by_canonical[cell] = CellResult(cell=cell, regret=regret, belief_error=err)

    table = ResultTable(config=config)
    for cell in cells:
        canon = by_canonical[cell.canonical()]
        table.cells[cell] = CellResult(cell=cell, regret=canon.regret,
                                       belief_error=canon.belief_error)
    return table


def emit_csv(table: ResultTable, out_dir) -> dict[str, str]:
    """Write the table under out_dir: aggregated per-step curves, per-run
    series (sufficient to reload the table exactly), and the config."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "curves": os.path.join(out_dir, "regret_curves.csv"),
        "runs": os.path.join(out_dir, "runs.csv"),
        "finals": os.path.join(out_dir, "finals.csv"),
        "config": os.path.join(out_dir, "config.json"),
    }
    ordered = sorted(table.cells, key=lambda c: c.cell_id)

    with open(paths["curves"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "step", "mean_regret", "ci95_low", "ci95_high"])
        for cell in ordered:
            res = table.cells[cell]
            lo, hi = res.regret_ci95()
            for step, (m, lo_s, hi_s) in enumerate(
                zip(res.mean_regret, lo, hi), start=1
            ):
                writer.writerow([cell.cell_id, step, repr(float(m)),
                                 repr(float(lo_s)), repr(float(hi_s))])

    with open(paths["runs"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "run", "step", "regret", "belief_error"])
        for cell in ordered:
            res = table.cells[cell]
            for run in range(res.regret.shape[0]):
                for step in range(res.regret.shape[1]):
                    writer.writerow([
                        cell.cell_id, run, step + 1,
                        repr(float(res.regret[run, step])),
                        repr(float(res.belief_error[run, step])),
                    ])

    with open(paths["finals"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "run", "final_regret", "final_belief_error"])
        for cell in ordered:
            res = table.cells[cell]
            for run in range(res.regret.shape[0]):
                writer.writerow([
                    cell.cell_id, run,
                    repr(float(res.final_regrets[run])),
                    repr(float(res.final_belief_errors[run])),
                ])

    with open(paths["config"], "w") as fh:
        json.dump(table.config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def load_table(out_dir) -> ResultTable:
    """Rebuild a ResultTable from emit_csv output."""
    with open(os.path.join(out_dir, "config.json")) as fh:
        config = ExperimentConfig.from_dict(json.load(fh))
    series: dict[str, dict[int, list[tuple[float, float]]]] = {}
    with open(os.path.join(out_dir, "runs.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            runs = series.setdefault(row["cell"], {})
            runs.setdefault(int(row["run"]), []).append(
                (float(row["regret"]), float(row["belief_error"]))
            )
    table = ResultTable(config=config)
    for cell_id, runs in series.items():
        cell = Cell.from_id(cell_id)
        regret = np.array([[v[0] for v in runs[r]] for r in sorted(runs)])
        err = np.array([[v[1] for v in runs[r]] for r in sorted(runs)])
        table.cells[cell] = CellResult(cell=cell, regret=regret, belief_error=err)
    return table


@dataclass(frozen=True)
class PairedTest:
    mean_diff: float
    t_stat: float
    p_value: float

    @property
    def significant_95(self) -> bool:
        return self.p_value < 0.05


def paired_less(a: np.ndarray, b: np.ndarray) -> PairedTest:
    """One-sided paired t test of mean(a - b) < 0 over shared runs."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    n = d.size
    sd = d.std(ddof=1)
    if sd == 0.0:
        t_stat = -np.inf if d.mean() < 0 else (np.inf if d.mean() > 0 else 0.0)
    else:
        t_stat = d.mean() / (sd / np.sqrt(n))
    p = float(stats.t.cdf(t_stat, df=n - 1))
    return PairedTest(mean_diff=float(d.mean()), t_stat=float(t_stat), p_value=p)


def summarize(table: ResultTable) -> str:
    """Human-readable report: per-cell final regret and paired fusion-mode
    differences within each (policy, fp_rate) slice."""
    lines = ["final cumulative regret (mean +/- 95% CI half-width):"]
    for cell in sorted(table.cells, key=lambda c: c.cell_id):
        res = table.cells[cell]
        finals = res.final_regrets
        hw = _Z95 * finals.std(ddof=1) / np.sqrt(finals.size)
        lines.append(
            f"  {cell.cell_id:<30} {finals.mean():8.3f} +/- {hw:6.3f}  (n={finals.size})"
        )
    lines.append("")
    lines.append("paired fusion-mode differences (negative favors the first mode):")
    pairs = [("psda", "naive"), ("naive", "no_human"), ("psda", "no_human")]
    for policy in table.config.policies:
        for fp in table.config.fp_rates:
            for mode_a, mode_b in pairs:
                ca, cb = Cell(policy, mode_a, fp), Cell(policy, mode_b, fp)
                if ca not in table.cells or cb not in table.cells:
                    continue
                test = paired_less(
                    table.cells[ca].final_regrets, table.cells[cb].final_regrets
                )
                verdict = "significant" if test.significant_95 else "n.s."
                lines.append(
                    f"  {policy} fp={fp!r}: {mode_a} - {mode_b} = "
                    f"{test.mean_diff:+.3f} (one-sided p={test.p_value:.4f}, {verdict})"
                )
    return "\n".join(lines)


def default_out_dir() -> str:
    return os.environ.get(OUT_DIR_ENV_VAR, "results")
