"""Run artifacts: trajectories, offers, metrics, ledger, deviations and the manifest."""
import hashlib
import json
import logging
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from steelflex.errors import InputFileError
from steelflex.metrics import build_report, effective_capacity
from steelflex.scheduler import ORDER_COLUMNS

logger = logging.getLogger(__name__)

PACKAGES = ("steelflex", "pyomo", "highspy", "numpy", "pandas", "pydantic")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if hasattr(value, "value") and not isinstance(value, (str, bytes)):
        return value.value
    return value


def write_json(path: Union[str, Path], data: Any):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(_jsonable(data), indent=2, sort_keys=True))
        f.write("\n")


def read_json(path: Union[str, Path]) -> Dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise InputFileError(f"Artifact not found: {path}", path=str(path)) from None
    except (OSError, json.JSONDecodeError) as e:
        raise InputFileError(f"Cannot read artifact {path}: {e}", path=str(path)) from None


def write_csv(path: Union[str, Path], frame: pd.DataFrame):
    frame.to_csv(path, index=False, lineterminator="\n")


def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def package_versions() -> Dict[str, str]:
    versions = {}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _with_completion(frame: pd.DataFrame, orders: Dict[str, float], dt: float) -> pd.DataFrame:
    frame = frame.copy()
    for unit, column in ORDER_COLUMNS.items():
        order = orders.get(unit)
        name = f"{unit.lower()}_completion"
        frame[name] = frame[column].cumsum() * dt / order if order else np.nan
    return frame


def trajectories(record) -> pd.DataFrame:
    """One row per period per phase with every dispatch field and order completion ratios."""
    dt = record.plant.horizon.dt_hours
    phases = [
        ("bd", record.bd.frame if record.bd else None),
        ("bi", record.bi_realized),
        ("dd", record.dd.frame if record.dd else None),
        ("di", record.di_realized),
    ]
    frames = []
    for phase, frame in phases:
        if frame is None:
            continue
        frame = _with_completion(frame, record.plant.orders, dt)
        frame.insert(0, "phase", phase)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def offers_frame(record) -> pd.DataFrame:
    offers = record.offers
    frame = pd.DataFrame(
        {
            "t": np.arange(len(offers.p_mag)),
            "p_mag": offers.p_mag,
            "d": offers.direction,
            "p_offer": offers.p_offer,
        }
    )
    if record.di_ledger is not None and record.bi_ledger is not None:
        frame["delivered"] = record.delivered()
        capacity = effective_capacity(
            offers.p_mag, offers.direction, record.bi_realized["netload"], record.di_realized["netload"]
        )
        frame["b_eff"] = capacity.per_period
    return frame


def _trading_summary(frame: pd.DataFrame, dt: float) -> Dict[str, float]:
    return {
        "cumulative_purchase_mwh": float(frame["p_buy"].sum() * dt),
        "cumulative_sales_mwh": float(frame["p_sell"].sum() * dt),
        "curtailed_energy_mwh": float(frame["p_curt"].sum() * dt),
        "peak_purchase_mw": float(frame["p_buy"].max()),
    }


def ledger_document(record) -> Dict:
    dt = record.plant.horizon.dt_hours
    document: Dict[str, Any] = {
        "costs": record.costs,
        "orders": dict(record.plant.orders),
        "pacing": record.pacing.value,
        "penalty_mechanism": record.penalty.mechanism.value,
    }
    for phase, solution in (("bd", record.bd), ("dd", record.dd)):
        if solution is not None:
            document[phase] = {"trading": _trading_summary(solution.frame, dt), "peak": solution.peak}
    for phase, ledger in (("bi", record.bi_ledger), ("di", record.di_ledger)):
        if ledger is None:
            continue
        document[phase] = {
            "production": dict(ledger.production),
            "residual": {v: ledger.residual(v) for v in record.plant.orders},
            "peak": ledger.peak,
            "peak_history": ledger.peak_history,
            "sell_cum_mwh": ledger.sell_cum,
            "res_cum_mwh": ledger.res_cum,
            "trading": _trading_summary(ledger.realized, dt),
        }
    return document


def manifest_document(record, arguments: Dict[str, Any], inputs: Dict[str, Optional[Path]]) -> Dict:
    hashes = {}
    for name, path in inputs.items():
        if path is None:
            continue
        path = Path(path)
        if path.is_dir():
            hashes[name] = {p.name: file_sha256(p) for p in sorted(path.glob("*.csv"))}
        else:
            hashes[name] = file_sha256(path)
    return {
        "arguments": arguments,
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "input_sha256": hashes,
        "plant_sha256": hashlib.sha256(record.plant.model_dump_json().encode("utf-8")).hexdigest(),
        "seed": record.forecast.seed,
        "stages": [m.value for m in record.stages],
        "versions": package_versions(),
        "solves": record.statuses,
    }


def write_run(
    record, out_dir: Union[str, Path], arguments: Dict[str, Any], inputs: Dict[str, Optional[Path]]
) -> List[Path]:
    """Write every artifact of ``record`` into ``out_dir``.

    Returns:
        Paths written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    path = out_dir / "trajectories.csv"
    write_csv(path, trajectories(record))
    written.append(path)

    if record.offers is not None:
        path = out_dir / "offers.csv"
        write_csv(path, offers_frame(record))
        written.append(path)

    if record.di_ledger is not None and record.bi_ledger is not None:
        report, deviations = build_report(record)
        path = out_dir / "metrics.json"
        write_json(path, report.to_dict())
        written.append(path)
        path = out_dir / "deviations.csv"
        write_csv(path, deviations)
        written.append(path)

    path = out_dir / "ledger.json"
    write_json(path, ledger_document(record))
    written.append(path)

    path = out_dir / "run_manifest.json"
    write_json(path, manifest_document(record, arguments, inputs))
    written.append(path)

    logger.info(f"Wrote {len(written)} artifacts to {out_dir}")
    return written


def compare_runs(run_a: Union[str, Path], run_b: Union[str, Path]) -> Dict[str, Dict[str, float]]:
    """Side-by-side totals of two DI run directories and their difference (b - a)."""

    def summary(run: Path) -> Dict[str, float]:
        ledger = read_json(run / "ledger.json")
        if "di" not in ledger:
            raise InputFileError(f"{run} holds no DI phase", path=str(run))
        trading = ledger["di"]["trading"]
        values = {
            "total_cost": ledger["costs"]["di"]["global"],
            "economic_cost": ledger["costs"]["di"]["economic"],
            "curtailed_energy_mwh": trading["curtailed_energy_mwh"],
            "cumulative_purchase_mwh": trading["cumulative_purchase_mwh"],
            "peak_purchase_mw": trading["peak_purchase_mw"],
        }
        metrics_path = run / "metrics.json"
        if metrics_path.exists():
            values["matching_degree"] = read_json(metrics_path)["matching_degree"]
        return values

    a, b = summary(Path(run_a)), summary(Path(run_b))
    return {"a": a, "b": b, "delta": {k: b[k] - a[k] for k in a if k in b}}
