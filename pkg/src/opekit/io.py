"""Log files, result tables, and run manifests.

Log files are JSON Lines: an optional first line
``{"_meta": {"reward_bound": ..., "weight_bound": ...}}`` followed by one
record per line. Scalar records hold ``context``, ``action``, ``p_log``,
``p_tgt``, and ``reward``; ranked records hold ``context`` and a
``positions`` list of per-position objects with ``action``, ``p_log``,
``p_tgt``, and ``reward``. Floats are serialised with ``repr``, which
round-trips exactly, so write-then-read reproduces a dataset bit for bit.

Result tables are CSV with columns
``estimator,n,mean,bias,variance,mse,se``, floats formatted with %.17g
and lines terminated with a bare newline. Reruns of the same study
therefore produce byte-identical files.

Every run writes a manifest. Its fingerprint hashes the fields that
determine the output bytes (tool version, config hash, master seed,
environment label, numpy version); ``created_at`` and the Python version
are recorded for the record but excluded, so two manifests with equal
fingerprints denote byte-identical data files.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import io as _stringio
import json
import os
import platform
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .analysis import hoeffding_tail_bound
from .data import Dataset, RankedDataset
from .errors import (
    BoundViolation,
    EmptyDataset,
    MissingBounds,
    NonFiniteValue,
    NonPositiveLoggingPropensity,
    ParseError,
)

TOOL_VERSION = "0.1.0"

CSV_COLUMNS = ("estimator", "n", "mean", "bias", "variance", "mse", "se")


@dataclass(frozen=True)
class RunManifest:
    """Provenance record for one output-producing run."""

    tool_version: str
    config_hash: str
    master_seed: int
    environment: str
    numpy_version: str
    python_version: str
    created_at: str

    STABLE_FIELDS = ("tool_version", "config_hash", "master_seed", "environment", "numpy_version")

    def fingerprint(self) -> str:
        """Hash of the fields that determine the output bytes."""
        payload = json.dumps(
            {name: getattr(self, name) for name in self.STABLE_FIELDS},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def to_dict(self) -> dict:
        return {**asdict(self), "fingerprint": self.fingerprint()}


def build_manifest(config_hash: str, master_seed: int, environment: str) -> RunManifest:
    return RunManifest(
        tool_version=TOOL_VERSION,
        config_hash=config_hash,
        master_seed=int(master_seed),
        environment=environment,
        numpy_version=np.__version__,
        python_version=platform.python_version(),
        created_at=datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    )


def atomic_write_text(path, text: str) -> None:
    """Write to a temporary sibling and rename, so readers never see partial files."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(f"{target.name}.tmp.{os.getpid()}")
    with open(tmp, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    os.replace(tmp, target)


def _jsonable_id(value):
    if value is None or isinstance(value, (str, bool)):
        return value
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return str(value)


def _scalar_record(dataset: Dataset, i: int) -> dict:
    return {
        "context": _jsonable_id(None if dataset.context_ids is None else dataset.context_ids[i]),
        "action": _jsonable_id(None if dataset.action_ids is None else dataset.action_ids[i]),
        "p_log": float(dataset.propensity_logging[i]),
        "p_tgt": float(dataset.propensity_target[i]),
        "reward": float(dataset.rewards[i]),
    }


def _ranked_record(dataset: RankedDataset, i: int) -> dict:
    positions = []
    for j in range(dataset.k):
        positions.append(
            {
                "action": _jsonable_id(
                    None if dataset.action_ids is None else dataset.action_ids[i, j]
                ),
                "p_log": float(dataset.propensity_logging[i, j]),
                "p_tgt": float(dataset.propensity_target[i, j]),
                "reward": float(dataset.rewards[i, j]),
            }
        )
    return {
        "context": _jsonable_id(None if dataset.context_ids is None else dataset.context_ids[i]),
        "positions": positions,
    }


def logs_text(dataset) -> str:
    """Serialise a dataset to JSON Lines with a bounds header."""
    meta = {
        "_meta": {
            "reward_bound": float(dataset.reward_bound),
            "weight_bound": float(dataset.weight_bound),
        }
    }
    lines = [json.dumps(meta, separators=(",", ":"))]
    ranked = isinstance(dataset, RankedDataset)
    for i in range(dataset.n):
        record = _ranked_record(dataset, i) if ranked else _scalar_record(dataset, i)
        lines.append(json.dumps(record, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def write_logs(dataset, path) -> None:
    atomic_write_text(path, logs_text(dataset))


def _number(obj: dict, key: str, lineno: int) -> float:
    if key not in obj:
        raise ParseError(lineno, f"missing field {key!r}")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(lineno, f"field {key!r} must be a number, got {value!r}")
    return float(value)


def _reraise_with_lines(exc, entry_lines: list[int]):
    line = entry_lines[exc.index]
    if isinstance(exc, NonPositiveLoggingPropensity):
        fresh = NonPositiveLoggingPropensity(exc.index, exc.value, line=line)
        fresh.position = exc.position
    elif isinstance(exc, BoundViolation):
        fresh = BoundViolation(
            exc.quantity, exc.index, exc.value, exc.bound, position=exc.position, line=line
        )
    else:
        fresh = NonFiniteValue(exc.quantity, exc.index, position=exc.position, line=line)
    raise fresh from None


def read_logs(path, reward_bound: float | None = None, weight_bound: float | None = None):
    """Parse and validate a JSON Lines log file.

    Bounds given as arguments override the file's ``_meta`` header; one of
    the two sources must provide both. Returns a :class:`Dataset` or a
    :class:`RankedDataset` depending on the records found. Errors
    reference 1-based line numbers.
    """
    text = Path(path).read_text(encoding="utf-8")
    meta_reward: float | None = None
    meta_weight: float | None = None
    kind: str | None = None
    entry_lines: list[int] = []
    columns: list[tuple] = []
    contexts: list = []
    actions: list = []
    k: int | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(lineno, "expected a JSON object")
        if "_meta" in obj:
            if entry_lines or meta_reward is not None or meta_weight is not None:
                raise ParseError(lineno, "_meta must appear once, before any record")
            meta = obj["_meta"]
            if not isinstance(meta, dict):
                raise ParseError(lineno, "_meta must be an object")
            meta_reward = _number(meta, "reward_bound", lineno)
            meta_weight = _number(meta, "weight_bound", lineno)
            continue
        this_kind = "ranked" if "positions" in obj else "scalar"
        if kind is None:
            kind = this_kind
        elif kind != this_kind:
            raise ParseError(lineno, f"{this_kind} record in a {kind} file")
        if this_kind == "scalar":
            columns.append(
                (
                    _number(obj, "p_log", lineno),
                    _number(obj, "p_tgt", lineno),
                    _number(obj, "reward", lineno),
                )
            )
            contexts.append(obj.get("context"))
            actions.append(obj.get("action"))
        else:
            positions = obj["positions"]
            if not isinstance(positions, list) or not positions:
                raise ParseError(lineno, "positions must be a non-empty list")
            if k is None:
                k = len(positions)
            elif len(positions) != k:
                raise ParseError(lineno, f"record has {len(positions)} positions, expected {k}")
            row = []
            row_actions = []
            for pos in positions:
                if not isinstance(pos, dict):
                    raise ParseError(lineno, "each position must be an object")
                row.append(
                    (
                        _number(pos, "p_log", lineno),
                        _number(pos, "p_tgt", lineno),
                        _number(pos, "reward", lineno),
                    )
                )
                row_actions.append(pos.get("action"))
            columns.append(tuple(row))
            contexts.append(obj.get("context"))
            actions.append(row_actions)
        entry_lines.append(lineno)
    if kind is None:
        raise EmptyDataset(f"no records in {path}")
    final_reward = reward_bound if reward_bound is not None else meta_reward
    final_weight = weight_bound if weight_bound is not None else meta_weight
    if final_reward is None or final_weight is None:
        raise MissingBounds()

    has_context = all(c is not None for c in contexts)
    if kind == "scalar":
        has_action = all(a is not None for a in actions)
        p_log = [c[0] for c in columns]
        p_tgt = [c[1] for c in columns]
        rewards = [c[2] for c in columns]
        try:
            return Dataset.from_arrays(
                p_log,
                p_tgt,
                rewards,
                reward_bound=final_reward,
                weight_bound=final_weight,
                context_ids=contexts if has_context else None,
                action_ids=actions if has_action else None,
            )
        except (NonPositiveLoggingPropensity, BoundViolation, NonFiniteValue) as exc:
            _reraise_with_lines(exc, entry_lines)
    has_action = all(a is not None for row in actions for a in row)
    p_log = [[pos[0] for pos in row] for row in columns]
    p_tgt = [[pos[1] for pos in row] for row in columns]
    rewards = [[pos[2] for pos in row] for row in columns]
    try:
        return RankedDataset.from_arrays(
            p_log,
            p_tgt,
            rewards,
            reward_bound=final_reward,
            weight_bound=final_weight,
            context_ids=contexts if has_context else None,
            action_ids=actions if has_action else None,
        )
    except (NonPositiveLoggingPropensity, BoundViolation, NonFiniteValue) as exc:
        _reraise_with_lines(exc, entry_lines)


def format_float(value: float) -> str:
    return "%.17g" % float(value)


def csv_text(rows) -> str:
    """Render study rows as a deterministic CSV table."""
    buffer = _stringio.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(
            [
                row.estimator,
                str(row.n),
                format_float(row.mean_estimate),
                format_float(row.bias),
                format_float(row.variance),
                format_float(row.mse),
                format_float(row.std_error),
            ]
        )
    return buffer.getvalue()


def write_csv(rows, path) -> None:
    atomic_write_text(path, csv_text(rows))


def write_json(payload: dict, path) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def moments_dict(moments) -> dict:
    return {
        "mean_w": moments.mean_w,
        "mean_wr": moments.mean_wr,
        "var_w": moments.var_w,
        "var_wr": moments.var_wr,
        "cov_w_wr": moments.cov_w_wr,
        "n": moments.n,
    }


def oracle_dict(report) -> dict:
    targets = []
    for target in report.targets:
        targets.append(
            {
                "label": target.label,
                "value": target.value,
                "beta_star": target.beta_star,
                "avar_snips_per_sample": target.avar_snips,
                "var_beta_star_per_sample": target.var_beta_star,
                "delta_per_sample": target.delta_per_sample,
                "moments": None if target.moments is None else moments_dict(target.moments),
            }
        )
    return {"targets": targets}


def rows_list(rows) -> list[dict]:
    return [
        {
            "estimator": row.estimator,
            "n": row.n,
            "mean": row.mean_estimate,
            "bias": row.bias,
            "variance": row.variance,
            "mse": row.mse,
            "se": row.std_error,
            "oracle_value": row.oracle_value,
            "n_used": row.n_used,
            "n_failed": row.n_failed,
        }
        for row in rows
    ]


def failures_list(failures) -> list[dict]:
    return [
        {"metric": f.metric, "replicate": f.replicate, "error": f.error} for f in failures
    ]


def study_payload(kind: str, study, manifest: RunManifest, extra: dict) -> dict:
    """Assemble the JSON report for a study run."""
    payload = {
        "study": kind,
        "scenario": study.scenario_label,
        "n_grid": list(study.n_grid),
        "replicates": study.replicates,
        "master_seed": study.master_seed,
        "estimators": list(study.estimators),
        "folds": study.folds,
        "oracle": oracle_dict(study.oracle),
        "rows": rows_list(study.rows),
        "failures": failures_list(study.failures),
        "half_mass_tail_bound": _tail_bounds(study),
        "manifest": manifest.to_dict(),
    }
    payload.update(extra)
    return payload


def _tail_bounds(study) -> dict | None:
    # P(mean weight < 1/2) ceiling per sample size, when the weight bound is known.
    bound = getattr(study, "weight_bound", float("nan"))
    if not np.isfinite(bound) or bound <= 0.0:
        return None
    return {str(n): hoeffding_tail_bound(n, bound) for n in study.n_grid}
