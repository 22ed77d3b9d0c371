"""Command-line entry point."""
import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import load_dotenv

from steelflex.artifacts import compare_runs, write_json, write_run
from steelflex.config import Config, PlantConfig, SolverSettings
from steelflex.errors import ConfigurationError, InternalError, SteelFlexError
from steelflex.history import build_library, default_cache
from steelflex.penalty import PenaltyConfig
from steelflex.rolling_engine import STAGES, ForecastModel, PacingMode, run_pipeline
from steelflex.run_logger import RunLogger
from steelflex.scenario import ExogenousScenario, load_history
from steelflex.validation import validate_inputs

logger = logging.getLogger(__name__)


class SteelFlexApp:
    def __init__(
        self,
        config_dir: Optional[str] = None,
        config_path: Optional[str] = None,
        scenario_path: Optional[str] = None,
        history_dir: Optional[str] = None,
    ):
        self.config = Config(config_dir)
        self.config_path = Path(config_path) if config_path else None
        self.plant = PlantConfig.load(self.config_path) if self.config_path else self.config.load_plant()
        if self.config_path is None:
            self.config_path = self.config.path_for("plant")
        self.scenario_path = Path(scenario_path) if scenario_path else self.config.path_for("scenario")
        self.history_dir = Path(history_dir) if history_dir else self.config.path_for("history")
        self.truth = ExogenousScenario.load(self.scenario_path)

    def penalty(self, mechanism=None, lambda_p=None, lambda_rf=None, lambda_s=None, cuts=None) -> PenaltyConfig:
        """Plant penalty configuration with command-line overrides applied."""
        updates = {
            "mechanism": mechanism,
            "lambda_p": lambda_p,
            "lambda_rf": lambda_rf,
            "lambda_s": lambda_s,
            "tangent_cut_count": cuts,
        }
        data = self.plant.penalty.model_dump()
        data.update({k: v for k, v in updates.items() if v is not None})
        try:
            penalty = PenaltyConfig(**data)
        except ValueError as e:
            raise ConfigurationError(f"Invalid penalty overrides: {e}") from None
        penalty.check()
        return penalty

    def library(self, penalty: PenaltyConfig, settings: SolverSettings):
        if penalty.lambda_rf == 0:
            return None
        if not self.history_dir.is_dir():
            logger.warning(f"No history directory at {self.history_dir}; SoC tracking disabled")
            return None
        return build_library(self.plant, load_history(self.history_dir), settings, cache=default_cache())

    def run(
        self,
        out_dir: str,
        mode: str = "full",
        penalty: Optional[PenaltyConfig] = None,
        pacing: str = "arm",
        seed: int = 0,
        dump_lp: bool = False,
        arguments: Optional[Dict] = None,
    ) -> List[Path]:
        penalty = penalty or self.penalty()
        settings = SolverSettings.from_env(seed=seed)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        forecast = ForecastModel.from_plant(self.plant, seed=seed)
        logger.info(
            f"Running {mode} on {self.truth.name} with {penalty.mechanism.value.upper()}, "
            f"lambda_p={penalty.lambda_p}, {pacing.upper()} pacing, seed {seed}"
        )
        record = run_pipeline(
            self.plant,
            self.truth,
            library=self.library(penalty, settings),
            forecast=forecast,
            penalty=penalty,
            pacing=pacing,
            settings=settings,
            stages=mode,
            run_logger=RunLogger(out),
            dump_lp_dir=out / "lp" if dump_lp else None,
        )
        inputs = {"config": self.config_path, "scenario": self.scenario_path}
        if penalty.lambda_rf > 0:
            inputs["history"] = self.history_dir
        return write_run(record, out, arguments or {}, inputs)


def _run_job(job: Dict) -> Dict:
    """Worker for sweeps; returns the exit code and error document of one run."""
    try:
        app = SteelFlexApp(job["config_dir"], job["config"], job["scenario"], job["history"])
        penalty = app.penalty(job["penalty"], job["lambda_p"], job["lambda_rf"], job["lambda_s"], job["cuts"])
        app.run(job["out"], job["mode"], penalty, job["pacing"], job["seed"], arguments=job)
        return {"out": job["out"], "exit_code": 0}
    except SteelFlexError as e:
        _write_error(job["out"], e)
        return {"out": job["out"], "exit_code": e.exit_code, "error": e.to_dict()}


def _write_error(out_dir: Optional[str], error: SteelFlexError):
    print(json.dumps(error.to_dict(), sort_keys=True), file=sys.stderr)
    if out_dir:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            write_json(Path(out_dir) / "error.json", error.to_dict())
        except OSError as e:
            logger.warning(f"Could not write error.json to {out_dir}: {e}")


def _add_input_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config-dir", help="Configuration directory (plant_config.json, scenario.csv, history/)")
    parser.add_argument("--config", help="Plant configuration JSON (overrides --config-dir)")
    parser.add_argument("--scenario", help="Scenario CSV (t, wind_mw, solar_mw, price_buy, price_sell, ...)")
    parser.add_argument("--history", help="Directory of history scenario CSVs for SoC references")


def _add_run_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--mode", choices=sorted(STAGES), default="full", help="Stages to run")
    parser.add_argument("--penalty", choices=["m1", "m2", "m3"], help="Process-deviation penalty mechanism")
    parser.add_argument("--pacing", choices=[m.value for m in PacingMode], default="arm", help="Order pacing rule")
    parser.add_argument("--lambda-rf", type=float, help="SoC reference-tracking weight")
    parser.add_argument("--lambda-s", type=float, help="Offer-shortfall weight")
    parser.add_argument("--cuts", type=int, help="Tangent cuts per side for M3")
    parser.add_argument("--seed", type=int, default=0, help="Forecast and solver seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="SteelFlex - demand-response scheduling for H2-DRI-EAF plants")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the scheduling pipeline and write artifacts")
    _add_input_arguments(run)
    _add_run_arguments(run)
    run.add_argument("--lambda-p", type=float, help="Process-deviation weight")
    run.add_argument("--out", required=True, help="Output directory")
    run.add_argument("--dump-lp", action="store_true", help="Write every model in LP format under OUT/lp")

    sweep = sub.add_parser("sweep", help="Run a lambda_p sweep and penalty ablation in parallel")
    _add_input_arguments(sweep)
    _add_run_arguments(sweep)
    sweep.add_argument("--lambda-p", type=float, nargs="+", default=[0.0, 50.0, 200.0], help="Values to sweep")
    sweep.add_argument("--penalties", nargs="+", choices=["m1", "m2", "m3"], help="Mechanisms to ablate")
    sweep.add_argument("--out", required=True, help="Parent output directory")
    sweep.add_argument("--jobs", type=int, default=1, help="Parallel runs")

    compare = sub.add_parser("compare", help="Compare two run directories")
    compare.add_argument("run_a")
    compare.add_argument("run_b")

    validate = sub.add_parser("validate", help="Validate inputs without solving")
    _add_input_arguments(validate)

    init = sub.add_parser("init-config", help="Write the bundled configuration into a directory")
    init.add_argument("directory")
    init.add_argument("--overwrite", action="store_true", help="Replace existing files")

    sub.add_parser("schema", help="Print the plant configuration JSON schema")
    return parser


def _load_env(config_dir: Optional[str]):
    load_dotenv()
    if config_dir:
        config_env_path = os.path.join(os.path.expanduser(config_dir), ".env")
        if os.path.exists(config_env_path):
            load_dotenv(config_env_path)


def _sweep_jobs(args) -> List[Dict]:
    mechanisms = args.penalties or [args.penalty]
    jobs = []
    for mechanism in mechanisms:
        for lambda_p in args.lambda_p:
            name = f"{mechanism or 'default'}_lambda_{lambda_p:g}"
            jobs.append(
                {
                    "config_dir": args.config_dir,
                    "config": args.config,
                    "scenario": args.scenario,
                    "history": args.history,
                    "mode": args.mode,
                    "penalty": mechanism,
                    "lambda_p": lambda_p,
                    "lambda_rf": args.lambda_rf,
                    "lambda_s": args.lambda_s,
                    "cuts": args.cuts,
                    "pacing": args.pacing,
                    "seed": args.seed,
                    "out": str(Path(args.out) / name),
                }
            )
    return jobs


def dispatch(args) -> int:
    if args.command == "schema":
        print(json.dumps(PlantConfig.model_json_schema(), indent=2, sort_keys=True))
        return 0
    if args.command == "init-config":
        written = Config(args.directory).write_defaults(overwrite=args.overwrite)
        for path in written:
            print(path)
        return 0
    if args.command == "compare":
        print(json.dumps(compare_runs(args.run_a, args.run_b), indent=2, sort_keys=True))
        return 0
    if args.command == "validate":
        config = Config(args.config_dir)
        report = validate_inputs(
            args.config or config.path_for("plant"),
            args.scenario or config.path_for("scenario"),
            args.history or config.path_for("history"),
        )
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        return 0 if report.ok else 1
    if args.command == "run":
        app = SteelFlexApp(args.config_dir, args.config, args.scenario, args.history)
        penalty = app.penalty(args.penalty, args.lambda_p, args.lambda_rf, args.lambda_s, args.cuts)
        arguments = {k: v for k, v in sorted(vars(args).items()) if k != "verbose"}
        app.run(args.out, args.mode, penalty, args.pacing, args.seed, args.dump_lp, arguments)
        return 0
    if args.command == "sweep":
        jobs = _sweep_jobs(args)
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(_run_job, jobs))
        else:
            results = [_run_job(job) for job in jobs]
        print(json.dumps(results, indent=2, sort_keys=True))
        return max((r["exit_code"] for r in results), default=0)
    raise ConfigurationError(f"Unknown command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    _load_env(getattr(args, "config_dir", None))

    try:
        return dispatch(args)
    except SteelFlexError as e:
        logger.error(e.message)
        _write_error(getattr(args, "out", None) if args.command == "run" else None, e)
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure in {args.command}")
        error = InternalError(f"Internal error: {e}", exception=type(e).__name__)
        _write_error(getattr(args, "out", None) if args.command == "run" else None, error)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
