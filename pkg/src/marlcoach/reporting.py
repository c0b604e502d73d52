"""Run reports, metrics emission, and run comparison.

Metrics go out as one record per training iteration in two forms: a CSV
(byte-identical across reruns of the same config and seeds) and
line-delimited JSON. The run report is a single JSON document embedding
the exact config, the package version, and every feedback phase with its
parsed assignments and pool changes.
"""

from __future__ import annotations

import json
import math
import os
from typing import Sequence

from . import __version__
from .learning import RunResult

REPORT_SCHEMA = "report/1"
METRICS_SCHEMA = "metrics/1"

CSV_COLUMNS = (
    "seed",
    "generation",
    "iteration",
    "mean_composed_return",
    "mean_original_return",
    "weights_agent1",
    "weights_agent2",
    "weights_agent3",
)


def _fmt(x: float) -> str:
    return repr(float(x))


def metrics_csv(results: Sequence[RunResult]) -> str:
    """Deterministic CSV over all seeds' per-iteration metrics."""
    lines = [",".join(CSV_COLUMNS)]
    for res in results:
        for row in res.metrics:
            weights = row["weights"]
            lines.append(
                ",".join(
                    [
                        str(res.seed),
                        str(row["generation"]),
                        str(row["iteration"]),
                        _fmt(row["mean_composed_return"]),
                        _fmt(row["mean_original_return"]),
                        "|".join(_fmt(w) for w in weights[1]),
                        "|".join(_fmt(w) for w in weights[2]),
                        "|".join(_fmt(w) for w in weights[3]),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def metrics_jsonl(results: Sequence[RunResult]) -> str:
    lines = []
    for res in results:
        for row in res.metrics:
            rec = {
                "schema": METRICS_SCHEMA,
                "seed": res.seed,
                "generation": row["generation"],
                "iteration": row["iteration"],
                "mean_composed_return": row["mean_composed_return"],
                "mean_original_return": row["mean_original_return"],
                "weights": {str(a): w for a, w in row["weights"].items()},
            }
            lines.append(json.dumps(rec, sort_keys=True))
    return "\n".join(lines) + "\n"


def _phase_dict(phase) -> dict:
    return {
        "generation": phase.generation,
        "r_ori": phase.r_ori,
        "skipped": phase.skipped,
        "utterance": phase.utterance,
        "parsed": phase.parsed,
        "rewards": {str(a): r for a, r in sorted(phase.rewards.items())},
        "adjustments": {str(a): adj for a, adj in sorted(phase.adjustments.items())},
        "weights_after": {str(a): w for a, w in sorted(phase.weights_after.items())},
    }


def build_report(config_dict: dict, results: Sequence[RunResult]) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "config": config_dict,
        "seeds": [res.seed for res in results],
        "runs": {
            str(res.seed): {
                "phases": [_phase_dict(p) for p in res.phases],
                "final_r_ori": res.final_r_ori,
                "feedback_phases": res.feedback_phase_count,
                "pools": {str(a): pool.to_dict() for a, pool in sorted(res.pools.items())},
            }
            for res in results
        },
    }


def write_report(path: str, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    if report.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unsupported report schema {report.get('schema')!r}")
    return report


class ReportMismatch(ValueError):
    pass


def _per_generation_r_ori(report: dict) -> list[list[float]]:
    """r_ori per generation, one inner list across seeds."""
    runs = [report["runs"][str(s)] for s in report["seeds"]]
    n_gens = min(len(r["phases"]) for r in runs) if runs else 0
    return [[run["phases"][k]["r_ori"] for run in runs] for k in range(n_gens)]


def compare_runs(report_a: dict, report_b: dict) -> list[dict]:
    """Per-generation mean/std of original return for two reports plus direction.

    Reports must share layout and recipe.
    """
    for key in ("layout", "recipe"):
        va, vb = report_a["config"].get(key), report_b["config"].get(key)
        if va != vb:
            raise ReportMismatch(f"reports disagree on {key}: {va!r} vs {vb!r}")

    def stats(values: list[float]) -> tuple[float, float]:
        n = len(values)
        mean = sum(values) / n
        var = sum((v - mean) ** 2 for v in values) / n
        return mean, math.sqrt(var)

    gens_a = _per_generation_r_ori(report_a)
    gens_b = _per_generation_r_ori(report_b)
    rows = []
    for k in range(min(len(gens_a), len(gens_b))):
        mean_a, std_a = stats(gens_a[k])
        mean_b, std_b = stats(gens_b[k])
        diff = mean_a - mean_b
        rows.append(
            {
                "generation": k,
                "mean_a": mean_a,
                "std_a": std_a,
                "mean_b": mean_b,
                "std_b": std_b,
                "diff": diff,
                "direction": "a" if diff > 0 else ("b" if diff < 0 else "tie"),
            }
        )
    return rows


def render_comparison(rows: list[dict]) -> str:
    header = f"{'gen':>3}  {'mean_a':>12}  {'std_a':>10}  {'mean_b':>12}  {'std_b':>10}  {'diff':>12}  win"
    lines = [header]
    for row in rows:
        lines.append(
            f"{row['generation']:>3}  {row['mean_a']:>12.4f}  {row['std_a']:>10.4f}  "
            f"{row['mean_b']:>12.4f}  {row['std_b']:>10.4f}  {row['diff']:>12.4f}  {row['direction']}"
        )
    return "\n".join(lines)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
