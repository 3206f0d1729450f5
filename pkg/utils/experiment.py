import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from policies import ReplicaAwarePolicy, get_policy
from utils.errors import ConstraintViolationError, FogPlacementError, ParameterError
from utils.metrics import evaluate_all, sample_failure_mask
from utils.placement import check_constraints
from utils.schema import ExperimentConfig
from utils.workload import generate_scenario, storage_usage_ratio

logger = logging.getLogger(__name__)

# Policies every sweep cell compares
SWEEP_POLICIES = ("replica-aware", "single-file", "fogstore")

RESULT_COLUMNS = [
    "policy", "n_files", "n_devices", "seed",
    "avail_read", "avail_write", "lat_read_ms", "lat_write_min_ms", "lat_write_max_ms",
    "msgs_write", "msgs_read", "storage_usage_ratio", "overflow_count",
    # reporting variants
    "lat_read_total_ms", "lat_write_min_total_ms", "lat_write_max_total_ms",
    "msgs_write_per_replica", "msgs_write_rate", "msgs_read_rate",
    "lat_read_excluded", "lat_write_excluded", "size_index", "repeat",
]
METRIC_COLUMNS = [
    "avail_read", "avail_write", "lat_read_ms", "lat_write_min_ms", "lat_write_max_ms",
    "msgs_write", "msgs_read", "storage_usage_ratio", "overflow_count",
    "lat_read_total_ms", "lat_write_min_total_ms", "lat_write_max_total_ms",
    "msgs_write_per_replica",
]
AVAILABILITY_COLUMNS = [
    "policy", "n_files", "n_devices", "seed", "repeat", "mask_index", "mask_seed",
    "down_count", "avail_read", "avail_write",
]
# Improvement-ratio column -> metric; all of them are lower-is-better
IMPROVEMENT_METRICS = {
    "ir_msgs_write": "msgs_write",
    "ir_msgs_read": "msgs_read",
    "ir_lat_read": "lat_read_ms",
    "ir_lat_write_min": "lat_write_min_ms",
    "ir_lat_write_max": "lat_write_max_ms",
}
UNDEFINED = "undefined"
FLOAT_FORMAT = "%.10g"


def default_sizes():
    """(n_files, n_devices) of the default sweep: a device sweep then a file sweep"""
    return ([(100, n_devices) for n_devices in range(100, 301, 20)]
            + [(n_files, 200) for n_files in range(100, 201, 10)])


class SweepPlan(BaseModel):
    """Pydantic model for the sizes, repeats and failure study of a sweep"""
    model_config = ConfigDict(frozen=True)

    sizes: Tuple[Tuple[int, int], ...] = Field(min_length=1)
    repeats: int = Field(default=10, ge=1)
    base_config: ExperimentConfig = ExperimentConfig()
    failure_fraction: float = Field(default=0.1, ge=0, lt=1)
    failure_mask_count: int = Field(default=10, ge=0)
    seed: int = 0
    policies: Tuple[str, ...] = SWEEP_POLICIES

    @classmethod
    def default(cls, config=None, **overrides):
        config = ExperimentConfig() if config is None else config
        fields = {"sizes": tuple(default_sizes()), "repeats": config.repeats,
                  "base_config": config, "seed": config.rng_seed}
        fields.update(overrides)
        return cls(**fields)

    def cells(self):
        """(size_index, n_files, n_devices, repeat) in output order"""
        return [(index, n_files, n_devices, repeat)
                for index, (n_files, n_devices) in enumerate(self.sizes)
                for repeat in range(self.repeats)]


class CellResult(BaseModel):
    """Everything one (size, repeat) cell produced"""
    size_index: int
    n_files: int
    n_devices: int
    repeat: int
    seed: int
    rows: List[dict] = []
    masks: List[dict] = []
    wall_times_ms: Dict[str, float] = {}
    error: Optional[str] = None


class SweepResult(BaseModel):
    plan: SweepPlan
    cells: List[CellResult] = []

    @property
    def errors(self):
        return [cell for cell in self.cells if cell.error is not None]

    def results_frame(self):
        rows = [row for cell in self.cells for row in cell.rows]
        return pd.DataFrame(rows, columns=RESULT_COLUMNS)

    def availability_frame(self):
        rows = [row for cell in self.cells for row in cell.masks]
        return pd.DataFrame(rows, columns=AVAILABILITY_COLUMNS)

    def wall_times_frame(self):
        rows = [{"n_files": cell.n_files, "n_devices": cell.n_devices, "repeat": cell.repeat,
                 "policy": policy, "wall_ms": wall}
                for cell in self.cells for policy, wall in cell.wall_times_ms.items()]
        return pd.DataFrame(rows, columns=["n_files", "n_devices", "repeat", "policy", "wall_ms"])


def cell_seed(plan_seed, *keys):
    """
    Counter-based seed of one cell

    The seed only depends on the plan seed and the cell's own keys, so adding
    sizes or repeats never perturbs existing cells.

    Args:
        plan_seed (int): master seed
        *keys (int): e.g. (n_files, n_devices, repeat)

    Returns:
        int: a 31-bit seed
    """
    sequence = np.random.SeedSequence(plan_seed, spawn_key=tuple(int(key) for key in keys))
    return int(sequence.generate_state(1, dtype=np.uint32)[0] >> 1)


def run_cell(plan, size_index, n_files, n_devices, repeat):
    """
    Generate one scenario and place and evaluate every policy on it

    Component errors abort the cell and are recorded on the result.
    """
    seed = cell_seed(plan.seed, n_files, n_devices, repeat)
    cell = CellResult(size_index=size_index, n_files=n_files, n_devices=n_devices, repeat=repeat, seed=seed)
    try:
        config = plan.base_config.model_copy(update={"n_files": n_files, "n_devices": n_devices})
        scenario = generate_scenario(config, seed)
        usage = storage_usage_ratio(scenario)
        masks = [sample_failure_mask(scenario.network, plan.failure_fraction, cell_seed(seed, index))
                 for index in range(plan.failure_mask_count)]

        for name in plan.policies:
            policy = get_policy(name, seed)
            start = time.perf_counter()
            placement, _ = policy.place(scenario)
            cell.wall_times_ms[name] = (time.perf_counter() - start) * 1000.0

            report = check_constraints(placement, scenario)
            if not report.feasible:
                raise ConstraintViolationError(report)
            metrics, per_mask = evaluate_all(scenario, placement, scenario.network, masks)

            row = {"policy": name, "n_files": n_files, "n_devices": n_devices, "seed": seed,
                   "storage_usage_ratio": usage, "overflow_count": placement.overflow_count,
                   "size_index": size_index, "repeat": repeat}
            row.update(metrics.model_dump())
            cell.rows.append(row)
            cell.masks.extend(
                {"policy": name, "n_files": n_files, "n_devices": n_devices, "seed": seed,
                 "repeat": repeat, "mask_index": item.mask_index, "mask_seed": item.seed,
                 "down_count": item.down_count, "avail_read": item.avail_read,
                 "avail_write": item.avail_write}
                for item in per_mask
            )
    except FogPlacementError as e:
        logger.warning("cell files=%d devices=%d repeat=%d aborted: %s", n_files, n_devices, repeat, e)
        cell.rows.clear()
        cell.masks.clear()
        cell.error = f"{type(e).__name__}: {e}"
    return cell


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(plan, workers=1, progress_callback=None):
    """
    Run every cell of a plan

    Args:
        plan (SweepPlan): sizes, repeats and failure study
        workers (int): parallel processes, 1 runs in-process
        progress_callback (callable, optional): called with (message, percentage)
            after each cell

    Returns:
        SweepResult: cells in plan order whatever the completion order
    """
    cells = plan.cells()
    tasks = [(plan, *cell) for cell in cells]
    result = SweepResult(plan=plan)
    logger.info("sweep: %d sizes x %d repeats, %d worker(s)", len(plan.sizes), plan.repeats, workers)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = executor.map(_run_cell_args, tasks)
            for done, cell in enumerate(outcomes, 1):
                result.cells.append(cell)
                _report(progress_callback, cell, done, len(tasks))
    else:
        for done, task in enumerate(tasks, 1):
            cell = run_cell(*task)
            result.cells.append(cell)
            _report(progress_callback, cell, done, len(tasks))
    return result


def _report(progress_callback, cell, done, total):
    message = f"files={cell.n_files} devices={cell.n_devices} repeat={cell.repeat}"
    if cell.error:
        message += f" failed ({cell.error})"
    logger.info("cell %d/%d %s", done, total, message)
    if progress_callback:
        progress_callback(message, round(100.0 * done / total))


def _as_frame(result):
    return result.results_frame() if isinstance(result, SweepResult) else result


def summarize(result):
    """Mean and standard deviation (over repeats) of every metric per size and policy"""
    frame = _as_frame(result)
    keys = ["size_index", "n_files", "n_devices", "policy"]
    grouped = frame.groupby(keys, sort=False)[METRIC_COLUMNS]
    # population deviation so a single repeat gives 0 rather than NaN
    means = grouped.mean().add_suffix("_mean")
    stds = grouped.std(ddof=0).add_suffix("_std")
    counts = grouped.size().rename("repeats")
    summary = pd.concat([counts, means, stds], axis=1).reset_index()
    ordered = ["size_index", "n_files", "n_devices", "policy", "repeats"]
    for column in METRIC_COLUMNS:
        ordered += [f"{column}_mean", f"{column}_std"]
    return summary[ordered]


def improvement_ratio(fogstore_value, replica_aware_value):
    """fogstore / replica-aware, so a ratio above 1 favors replica-aware; NaN when undefined"""
    if replica_aware_value == 0 or math.isnan(replica_aware_value) or math.isnan(fogstore_value):
        return math.nan
    return fogstore_value / replica_aware_value


def improvement_table(result):
    """
    Paired improvement ratios of replica-aware over fogstore per size

    Ratios compare the per-size means over repeats. The last row holds the
    average of every column over the sizes with a defined value.

    Args:
        result (SweepResult or pandas.DataFrame): sweep rows

    Returns:
        pandas.DataFrame: n_files, n_devices, the five ratios and the storage usage
    """
    frame = _as_frame(result)
    means = frame.groupby(["size_index", "n_files", "n_devices", "policy"], sort=False)[
        list(IMPROVEMENT_METRICS.values()) + ["storage_usage_ratio"]].mean()

    rows = []
    sizes = frame[["size_index", "n_files", "n_devices"]].drop_duplicates()
    for size_index, n_files, n_devices in sizes.itertuples(index=False):
        try:
            ours = means.loc[(size_index, n_files, n_devices, "replica-aware")]
            theirs = means.loc[(size_index, n_files, n_devices, "fogstore")]
        except KeyError:
            logger.warning("size files=%d devices=%d lacks a policy, no ratio", n_files, n_devices)
            continue
        row = {"n_files": str(n_files), "n_devices": str(n_devices)}
        for column, metric in IMPROVEMENT_METRICS.items():
            row[column] = improvement_ratio(float(theirs[metric]), float(ours[metric]))
        row["storage_usage_ratio"] = float(ours["storage_usage_ratio"])
        rows.append(row)

    columns = ["n_files", "n_devices"] + list(IMPROVEMENT_METRICS) + ["storage_usage_ratio"]
    table = pd.DataFrame(rows, columns=columns)
    averages = {"n_files": "average", "n_devices": ""}
    for column in columns[2:]:
        averages[column] = table[column].mean(skipna=True) if len(table) else math.nan
    return pd.concat([table, pd.DataFrame([averages], columns=columns)], ignore_index=True)


def time_placement(n_devices_list, repeats, config=None, seed=0):
    """
    Wall-time of placing one file with the replica-aware policy

    Only the placement call is timed, not the scenario generation.

    Args:
        n_devices_list (list[int]): network sizes, each at least 10
        repeats (int): scenarios per size
        config (ExperimentConfig, optional): other parameters
        seed (int): master seed

    Returns:
        pandas.DataFrame: n_devices, repeats, mean_ms, std_ms
    """
    if repeats < 1:
        raise ParameterError("timing needs at least one repeat")
    if not n_devices_list:
        raise ParameterError("timing needs at least one network size")
    config = ExperimentConfig() if config is None else config

    rows = []
    for n_devices in n_devices_list:
        if n_devices < 10:
            raise ParameterError(f"timing sizes must be at least 10 devices, got {n_devices}")
        sized = config.model_copy(update={"n_devices": n_devices, "n_files": 1})
        elapsed = []
        for repeat in range(repeats):
            scenario = generate_scenario(sized, cell_seed(seed, n_devices, repeat))
            start = time.perf_counter()
            ReplicaAwarePolicy(kl_seed=seed).place(scenario)
            elapsed.append((time.perf_counter() - start) * 1000.0)
        rows.append({"n_devices": n_devices, "repeats": repeats,
                     "mean_ms": float(np.mean(elapsed)), "std_ms": float(np.std(elapsed))})
        logger.info("timing n=%d: %.2f ms", n_devices, rows[-1]["mean_ms"])
    return pd.DataFrame(rows, columns=["n_devices", "repeats", "mean_ms", "std_ms"])


def growth_exponent(timing):
    """Slope of log(mean time) over log(size); above 1 means superlinear growth"""
    if len(timing) < 2:
        raise ParameterError("growth exponent needs at least two sizes")
    slope, _ = np.polyfit(np.log(timing["n_devices"].astype(float)), np.log(timing["mean_ms"]), 1)
    return float(slope)


def _write_frame(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep=UNDEFINED, lineterminator="\n")
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def write_results_csv(result, path):
    return _write_frame(_as_frame(result), path)


def write_availability_csv(result, path):
    return _write_frame(result.availability_frame(), path)


def write_summary_csv(result, path):
    return _write_frame(summarize(result), path)


def write_improvement_csv(result, path):
    return _write_frame(improvement_table(result), path)


def write_timing_csv(timing, path):
    return _write_frame(timing, path)


__all__ = [
    "SWEEP_POLICIES",
    "SweepPlan",
    "SweepResult",
    "cell_seed",
    "default_sizes",
    "growth_exponent",
    "improvement_table",
    "run_sweep",
    "summarize",
    "time_placement",
]
