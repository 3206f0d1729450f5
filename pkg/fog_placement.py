import argparse
import logging
import os
import sys

import pandas as pd
from dotenv import load_dotenv

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from policies import POLICY_NAMES, get_policy
from utils.errors import ConstraintViolationError, FogPlacementError, ParameterError
from utils.experiment import (
    RESULT_COLUMNS,
    SweepPlan,
    cell_seed,
    growth_exponent,
    run_sweep,
    time_placement,
    write_availability_csv,
    write_improvement_csv,
    write_results_csv,
    write_summary_csv,
    write_timing_csv,
)
from utils.metrics import evaluate_all, sample_failure_mask
from utils.placement import check_constraints, read_placement, write_placement, write_trace
from utils.schema import ExperimentConfig
from utils.workload import (
    generate_scenario,
    load_experiment_config,
    read_scenario,
    storage_usage_ratio,
    write_scenario,
)

logger = logging.getLogger("fog_placement")

DEFAULT_OUT_DIR = "results"
DEFAULT_TIMING_SIZES = (100, 200, 400)


class FogPlacementSystem:
    def __init__(self, config=None, out_dir=DEFAULT_OUT_DIR, workers=1, verbose=False):
        """
        Initialize the file replica placement system

        Args:
            config (ExperimentConfig): experiment characterization
            out_dir (str): directory every output file is written to
            workers (int): parallel processes for sweeps
            verbose (bool): Whether to print progress
        """
        self.config = ExperimentConfig() if config is None else config
        self.out_dir = out_dir
        self.workers = workers
        self.verbose = verbose
        self.outputs = []

    def _path(self, filename):
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, filename)
        self.outputs.append(path)
        return path

    def generate(self, seed=None):
        """Generate a scenario and write it to scenario.txt"""
        scenario = generate_scenario(self.config, seed)
        write_scenario(scenario, self._path("scenario.txt"))
        if self.verbose:
            print(f"Scenario seed={scenario.rng_seed}: {scenario.network.n_devices} devices, "
                  f"{len(scenario.network.gateways)} gateways, {len(scenario.files)} files, "
                  f"storage usage {storage_usage_ratio(scenario):.3f}")
        for warning in scenario.warnings:
            print(f"Warning: {warning}")
        return scenario

    def place(self, scenario, policy_name, seed=None, trace=False):
        """
        Run one policy on a scenario

        Args:
            scenario (Scenario): the scenario to place
            policy_name (str): one of POLICY_NAMES
            seed (int, optional): policy seed, the configuration's by default
            trace (bool): also write the decision trace

        Returns:
            PlacementMatrix: the checked placement
        """
        seed = self.config.rng_seed if seed is None else seed
        placement, placement_trace = get_policy(policy_name, seed).place(scenario)
        report = check_constraints(placement, scenario)
        if not report.feasible:
            raise ConstraintViolationError(report)
        write_placement(placement, self._path(f"placement_{policy_name}.txt"))
        if trace:
            write_trace(placement_trace, self._path(f"trace_{policy_name}.jsonl"))
        if self.verbose:
            print(f"{policy_name}: {len(placement.assignments)} files placed, "
                  f"{placement.overflow_count} overflowed to the cloud")
        return placement

    def evaluate(self, scenario, placement, failures=0.0, masks=0, seed=None):
        """Metrics of one placement, written to results.csv and availability.csv"""
        seed = self.config.rng_seed if seed is None else seed
        failure_masks = [sample_failure_mask(scenario.network, failures, cell_seed(seed, index))
                         for index in range(masks)]
        report, per_mask = evaluate_all(scenario, placement, scenario.network, failure_masks)

        row = {"policy": placement.policy, "n_files": len(scenario.files),
               "n_devices": scenario.network.n_devices - 1, "seed": scenario.rng_seed,
               "storage_usage_ratio": storage_usage_ratio(scenario),
               "overflow_count": placement.overflow_count, "size_index": 0, "repeat": 0}
        row.update(report.model_dump())
        write_results_csv(pd.DataFrame([row], columns=RESULT_COLUMNS), self._path("results.csv"))
        availability = pd.DataFrame([item.model_dump() for item in per_mask],
                                    columns=["mask_index", "seed", "down_count", "avail_read", "avail_write"])
        write_results_csv(availability, self._path("availability.csv"))
        self.print_report(placement.policy, report)
        return report

    def sweep(self, sizes=None, repeats=None, seed=None, failures=0.1, masks=10, policies=None):
        """Run a sweep and write results, summary, improvement and availability CSVs"""
        overrides = {"failure_fraction": failures, "failure_mask_count": masks}
        if sizes:
            overrides["sizes"] = tuple(sizes)
        if repeats is not None:
            overrides["repeats"] = repeats
        if seed is not None:
            overrides["seed"] = seed
        if policies:
            overrides["policies"] = tuple(policies)
        plan = SweepPlan.default(self.config, **overrides)

        callback = self._progress if self.verbose else None
        result = run_sweep(plan, workers=self.workers, progress_callback=callback)

        write_results_csv(result, self._path("results.csv"))
        write_summary_csv(result, self._path("summary.csv"))
        if {"replica-aware", "fogstore"} <= set(plan.policies):
            write_improvement_csv(result, self._path("improvement.csv"))
        write_availability_csv(result, self._path("availability.csv"))
        for cell in result.errors:
            print(f"Cell files={cell.n_files} devices={cell.n_devices} repeat={cell.repeat} failed: {cell.error}")
        return result

    def time(self, sizes=DEFAULT_TIMING_SIZES, repeats=None, seed=None):
        """Placement wall-time per network size, written to timing.csv"""
        repeats = self.config.repeats if repeats is None else repeats
        seed = self.config.rng_seed if seed is None else seed
        timing = time_placement(list(sizes), repeats, self.config, seed)
        write_timing_csv(timing, self._path("timing.csv"))
        print(timing.to_string(index=False))
        if len(timing) > 1:
            print(f"Growth exponent: {growth_exponent(timing):.2f}")
        return timing

    def _progress(self, message, percentage):
        print(f"[{percentage:3d}%] {message}")

    def print_report(self, policy, report):
        """Print the metrics of one placement in a formatted way"""
        print("\n" + "=" * 60)
        print(f"PLACEMENT METRICS: {policy}")
        print("=" * 60)
        print(f"Read availability:        {report.avail_read:.4f}")
        print(f"Write availability:       {report.avail_write:.4f}")
        print(f"Read latency (ms):        {report.lat_read_ms:.3f}")
        print(f"Min write latency (ms):   {report.lat_write_min_ms:.3f}")
        print(f"Max write latency (ms):   {report.lat_write_max_ms:.3f}")
        print(f"Write messages:           {report.msgs_write}")
        print(f"Read messages:            {report.msgs_read}")
        print("=" * 60)


def parse_sizes(text):
    """'100x200,110x200' -> [(100, 200), (110, 200)] (files x devices)"""
    sizes = []
    for item in text.split(","):
        try:
            n_files, n_devices = item.lower().split("x")
            sizes.append((int(n_files), int(n_devices)))
        except ValueError as e:
            raise ParameterError(f"size {item!r} is not FILESxDEVICES") from e
    return sizes


def parse_int_list(text):
    try:
        return [int(item) for item in text.split(",")]
    except ValueError as e:
        raise ParameterError(f"{text!r} is not a comma-separated list of integers") from e


def build_parser():
    parser = argparse.ArgumentParser(description="File replica placement in fog computing")
    parser.add_argument("--verbose", action="store_true", help="Enable verbose output")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("--config", help="Experiment configuration file (key=value)")
        sub.add_argument("--seed", type=int, help="Seed (defaults to the configuration's)")
        sub.add_argument("--out", help="Output directory")
        sub.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS,
                         help="Enable verbose output")
        return sub

    common(commands.add_parser("generate", help="Generate a scenario"))

    place = common(commands.add_parser("place", help="Place the files of a scenario"))
    place.add_argument("--scenario", help="Scenario file (generated from the configuration if omitted)")
    place.add_argument("--policy", choices=POLICY_NAMES, default="replica-aware")
    place.add_argument("--trace", action="store_true", help="Also write the decision trace")

    evaluate = common(commands.add_parser("eval", help="Metrics of a placement"))
    evaluate.add_argument("--scenario", required=True, help="Scenario file")
    evaluate.add_argument("--placement", required=True, help="Placement file")
    evaluate.add_argument("--failures", type=float, default=0.0, help="Fraction of fog devices failed")
    evaluate.add_argument("--masks", type=int, default=0, help="Failure masks to average over")

    sweep = common(commands.add_parser("sweep", help="Run the experiment sweep"))
    sweep.add_argument("--sizes", help="FILESxDEVICES list, e.g. 100x200,110x200")
    sweep.add_argument("--repeats", type=int)
    sweep.add_argument("--failures", type=float, default=0.1)
    sweep.add_argument("--masks", type=int, default=10)
    sweep.add_argument("--policy", action="append", choices=POLICY_NAMES,
                       help="Policy to compare (repeatable, default: replica-aware, single-file, fogstore)")
    sweep.add_argument("--workers", type=int, help="Parallel processes")

    timing = common(commands.add_parser("time", help="Placement wall-time per network size"))
    timing.add_argument("--sizes", help="Device counts, e.g. 100,200,400")
    timing.add_argument("--repeats", type=int)
    return parser


def main(argv=None):
    load_dotenv()
    args = build_parser().parse_args(argv)

    level = logging.DEBUG if args.verbose else os.getenv("FOG_PLACEMENT_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        config_path = args.config or os.getenv("FOG_PLACEMENT_CONFIG")
        config = load_experiment_config(config_path) if config_path else ExperimentConfig()
        system = FogPlacementSystem(
            config=config,
            out_dir=args.out or os.getenv("FOG_PLACEMENT_OUT_DIR", DEFAULT_OUT_DIR),
            workers=getattr(args, "workers", None) or int(os.getenv("FOG_PLACEMENT_WORKERS", "1")),
            verbose=args.verbose,
        )

        if args.command == "generate":
            system.generate(args.seed)
        elif args.command == "place":
            scenario = read_scenario(args.scenario) if args.scenario else system.generate(args.seed)
            system.place(scenario, args.policy, args.seed, args.trace)
        elif args.command == "eval":
            scenario = read_scenario(args.scenario)
            placement = read_placement(args.placement)
            system.evaluate(scenario, placement, args.failures, args.masks, args.seed)
        elif args.command == "sweep":
            system.sweep(
                sizes=parse_sizes(args.sizes) if args.sizes else None,
                repeats=args.repeats,
                seed=args.seed,
                failures=args.failures,
                masks=args.masks,
                policies=args.policy,
            )
        elif args.command == "time":
            sizes = parse_int_list(args.sizes) if args.sizes else DEFAULT_TIMING_SIZES
            system.time(sizes, args.repeats, args.seed)
    except (FogPlacementError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    for path in system.outputs:
        print(f"Wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
