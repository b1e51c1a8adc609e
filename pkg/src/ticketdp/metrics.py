"""Loss metrics, grouped summaries and the oracle-reversal check.

The primary scale-free metric is the ratio-of-means relative loss

    rom = (sum_m R_m_oracle - sum_m R_m_misspec) / sum_m R_m_oracle

over paired simulation runs.  Grouped summaries pool the runs of the whole
group (ratio of sums), which is not the same thing as averaging per-case
ratios.  Percentiles use linear interpolation between order statistics, and
paired confidence intervals use the normal quantile (1.959964 at 95%) — at
thousands of runs a t quantile would be indistinguishable.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import ndtri

from .experiment import load_results, CONFIG_FILE, MANIFEST_FILE

GROUPING_COLUMNS = {
    "error_type": "error_type",
    "scenario": "scenario",
    "eta_level": "eta",
    "deadline_regime": "deadline_regime",
    "inventory_level": "inventory_q",
}

REPORT_FILES = ("global_summary.csv", "error_type_ranking.csv", "group_summaries.csv",
                "env_heatmap.csv", "oracle_sanity.csv")

SUMMARY_COLUMNS = ("cases", "mean_oracle_revenue", "mean_misspec_revenue",
                   "mean_abs_loss", "median_abs_loss", "rom_loss",
                   "p90_abs_loss", "p90_case_rom_loss")


def percentile(values, q: float) -> float:
    """q-th percentile, linear interpolation between closest order statistics."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("percentile of an empty collection")
    return float(np.percentile(arr, q))


def rom_relative_loss(oracle_revenues, misspec_revenues) -> float:
    """(sum oracle - sum misspec) / sum oracle over paired runs.

    Negative when the misspecified policy happened to earn more in sample.
    """
    o = np.asarray(oracle_revenues, dtype=float)
    m = np.asarray(misspec_revenues, dtype=float)
    if o.shape != m.shape or o.size == 0:
        raise ValueError("revenue lists must be equal-length, non-empty and run-paired")
    total = float(np.sum(o))
    if total <= 0:
        raise ValueError("oracle revenues sum to zero; relative loss undefined")
    return (total - float(np.sum(m))) / total


def absolute_loss_stats(oracle_case_means, misspec_case_means) -> dict:
    """Mean/median/90th-percentile of per-case losses (oracle mean - misspec mean)."""
    o = np.asarray(oracle_case_means, dtype=float)
    m = np.asarray(misspec_case_means, dtype=float)
    if o.shape != m.shape or o.size == 0:
        raise ValueError("case means must be equal-length, non-empty and paired")
    losses = o - m
    return {
        "mean_abs_loss": float(np.mean(losses)),
        "median_abs_loss": percentile(losses, 50),
        "p90_abs_loss": percentile(losses, 90),
    }


@dataclass(frozen=True)
class PairedTestResult:
    """Normal-approximation CI for the mean paired difference oracle - challenger."""

    mean_diff: float
    se: float
    ci_lower: float
    ci_upper: float
    level: float
    classification: str


def paired_difference_ci(oracle, challenger, level: float = 0.95) -> PairedTestResult:
    o = np.asarray(oracle, dtype=float)
    c = np.asarray(challenger, dtype=float)
    if o.shape != c.shape:
        raise ValueError("paired samples must have equal length")
    if o.size < 2:
        raise ValueError("need at least 2 paired runs for a confidence interval")
    if not 0 < level < 1:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    d = o - c
    mean = float(np.mean(d))
    se = float(np.std(d, ddof=1) / math.sqrt(d.size))
    z = float(ndtri(0.5 + level / 2.0))
    lo, hi = mean - z * se, mean + z * se
    if hi < 0:
        label = "significant_reversal"
    elif mean < 0:
        label = "raw_reversal"
    else:
        label = "no_reversal"
    return PairedTestResult(mean, se, lo, hi, level, label)


def case_table(runs: pd.DataFrame, cases: pd.DataFrame) -> pd.DataFrame:
    """Per non-oracle case: its run sums/means plus the paired oracle ones."""
    agg = (runs.groupby(["scenario", "label", "env_id"], sort=False)["revenue"]
           .agg(["sum", "mean", "count"]).reset_index())
    merged = cases.merge(agg, on=["scenario", "label", "env_id"],
                         how="inner", validate="one_to_one")
    oracle = (merged[merged.is_oracle == "true"]
              [["scenario", "env_id", "sum", "mean"]]
              .rename(columns={"sum": "oracle_sum", "mean": "oracle_mean"}))
    out = (merged[merged.is_oracle == "false"]
           .merge(oracle, on=["scenario", "env_id"], validate="many_to_one")
           .reset_index(drop=True))
    out["abs_loss"] = out["oracle_mean"] - out["mean"]
    out["case_rom"] = (out["oracle_sum"] - out["sum"]) / out["oracle_sum"]
    return out


def summarize_cases(sub: pd.DataFrame) -> dict:
    """One LossSummary over a set of non-oracle cases, runs pooled for ROM."""
    if len(sub) == 0:
        raise ValueError("cannot summarise an empty case set")
    oracle_total = float(sub["oracle_sum"].sum())
    return {
        "cases": int(len(sub)),
        "mean_oracle_revenue": float(sub["oracle_mean"].mean()),
        "mean_misspec_revenue": float(sub["mean"].mean()),
        "mean_abs_loss": float(sub["abs_loss"].mean()),
        "median_abs_loss": percentile(sub["abs_loss"], 50),
        "rom_loss": (oracle_total - float(sub["sum"].sum())) / oracle_total,
        "p90_abs_loss": percentile(sub["abs_loss"], 90),
        "p90_case_rom_loss": percentile(sub["case_rom"], 90),
    }


def group_summary(case_df: pd.DataFrame, grouping: str) -> list[dict]:
    """One LossSummary per group, ROM as a ratio of pooled sums."""
    if grouping not in GROUPING_COLUMNS:
        raise ValueError(
            f"unknown grouping {grouping!r}; choose from {sorted(GROUPING_COLUMNS)}")
    col = GROUPING_COLUMNS[grouping]
    rows = []
    for value, sub in sorted(case_df.groupby(col, sort=True)):
        row = {"grouping": grouping, "group": value}
        row.update(summarize_cases(sub))
        rows.append(row)
    return rows


def env_heatmap(case_df: pd.DataFrame) -> list[dict]:
    """Pooled ROM per environment cell (eta x deadline regime x inventory)."""
    rows = []
    keys = ["eta", "deadline_regime", "inventory_q"]
    for (eta, regime, q), sub in sorted(case_df.groupby(keys)):
        oracle_total = float(sub["oracle_sum"].sum())
        rows.append({
            "eta": eta, "deadline_regime": regime, "inventory_q": int(q),
            "cases": int(len(sub)),
            "rom_loss": (oracle_total - float(sub["sum"].sum())) / oracle_total,
        })
    return rows


def oracle_sanity_report(runs: pd.DataFrame, cases: pd.DataFrame,
                         level: float = 0.95) -> dict:
    """Best distinct non-oracle challenger per cell, with paired classification.

    A proxy qualifies as a challenger only if its policy differs from the
    oracle's at some reachable state; identical-policy proxies tie the oracle
    run for run and carry no information.  Cells with no distinct proxy are
    reported as degenerate.
    """
    revenue_of = {key: grp["revenue"].to_numpy()
                  for key, grp in runs.groupby(["scenario", "label", "env_id"], sort=False)}
    cells = []
    n_raw = n_sig = 0
    diffs = []
    cell_keys = cases[cases.is_oracle == "true"][["scenario", "env_id"]]
    for scenario, env_id in cell_keys.itertuples(index=False):
        oracle_rev = revenue_of[(scenario, scenario, env_id)]
        sub = cases[(cases.scenario == scenario) & (cases.env_id == env_id)
                    & (cases.is_oracle == "false")]
        candidates = []
        for label, distinct in zip(sub["label"], sub["policy_distinct"]):
            if distinct == "true":
                rev = revenue_of[(scenario, label, env_id)]
                candidates.append((float(np.mean(rev)), label, rev))
        if not candidates:
            cells.append({"scenario": scenario, "env_id": env_id, "challenger": "",
                          "mean_paired_diff": float("nan"), "se": float("nan"),
                          "ci_lower": float("nan"), "ci_upper": float("nan"),
                          "classification": "degenerate"})
            continue
        best_mean = max(m for m, _, _ in candidates)
        tied = sorted((c for c in candidates if c[0] == best_mean), key=lambda c: c[1])
        _, label, challenger_rev = tied[0]
        test = paired_difference_ci(oracle_rev, challenger_rev, level)
        if test.classification == "significant_reversal":
            n_sig += 1
        elif test.classification == "raw_reversal":
            n_raw += 1
        diffs.append(test.mean_diff)
        cells.append({"scenario": scenario, "env_id": env_id, "challenger": label,
                      "mean_paired_diff": test.mean_diff, "se": test.se,
                      "ci_lower": test.ci_lower, "ci_upper": test.ci_upper,
                      "classification": test.classification})
    n_cells = len(cells)
    aggregates = {
        "cells": n_cells,
        "degenerate_cells": sum(1 for c in cells if c["classification"] == "degenerate"),
        "raw_reversal_rate": n_raw / n_cells if n_cells else float("nan"),
        "significant_reversal_rate": n_sig / n_cells if n_cells else float("nan"),
        "mean_paired_diff": float(np.mean(diffs)) if diffs else float("nan"),
        "min_paired_diff": float(np.min(diffs)) if diffs else float("nan"),
        "confidence_level": level,
    }
    return {"cells": cells, "aggregates": aggregates}


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path, rows: list[dict], columns) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(columns)
        for row in rows:
            wr.writerow([_fmt(row[c]) for c in columns])


def emit_report(results_dir, out_dir=None, groupings=None, level: float = 0.95) -> dict:
    """Compute every summary from persisted raw results and write the report.

    Writes five delimited data files (global summary, error-type ranking,
    grouped summaries, environment heat-map data, oracle sanity data), a
    machine-readable summary.json, and snapshots of the run's config and
    manifest.  Re-running on the same inputs reproduces identical bytes.
    """
    results_dir = Path(results_dir)
    out = Path(out_dir) if out_dir is not None else results_dir / "report"
    out.mkdir(parents=True, exist_ok=True)
    runs, cases, manifest, config = load_results(results_dir)
    case_df = case_table(runs, cases)
    if groupings is None:
        groupings = list(GROUPING_COLUMNS)
    for g in groupings:
        if g not in GROUPING_COLUMNS:
            raise ValueError(f"unknown grouping {g!r}")

    global_row = summarize_cases(case_df)
    _write_csv(out / "global_summary.csv", [global_row], SUMMARY_COLUMNS)

    ranking = group_summary(case_df, "error_type")
    ranking.sort(key=lambda r: (-r["rom_loss"], r["group"]))
    rank_cols = ("error_type", "cases", "mean_abs_loss", "rom_loss")
    rank_rows = [{"error_type": r["group"], "cases": r["cases"],
                  "mean_abs_loss": r["mean_abs_loss"], "rom_loss": r["rom_loss"]}
                 for r in ranking]
    _write_csv(out / "error_type_ranking.csv", rank_rows, rank_cols)

    group_rows = []
    for g in groupings:
        group_rows.extend(group_summary(case_df, g))
    _write_csv(out / "group_summaries.csv", group_rows,
               ("grouping", "group") + SUMMARY_COLUMNS)

    heat_rows = env_heatmap(case_df)
    _write_csv(out / "env_heatmap.csv", heat_rows,
               ("eta", "deadline_regime", "inventory_q", "cases", "rom_loss"))

    sanity = oracle_sanity_report(runs, cases, level)
    _write_csv(out / "oracle_sanity.csv", sanity["cells"],
               ("scenario", "env_id", "challenger", "mean_paired_diff", "se",
                "ci_lower", "ci_upper", "classification"))

    summary = {
        "global": global_row,
        "error_type_ranking": rank_rows,
        "groups": {g: group_summary(case_df, g) for g in groupings},
        "env_heatmap": heat_rows,
        "oracle_sanity": sanity["aggregates"],
        "confidence_level": level,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    for name in (CONFIG_FILE, MANIFEST_FILE):
        src = results_dir / name
        dst = out / name
        if src.resolve() != dst.resolve():
            dst.write_bytes(src.read_bytes())

    return summary


def human_tables(summary: dict) -> str:
    """Plain-text report with percentages at 2 decimals."""
    lines = []
    g = summary["global"]
    lines.append("Global summary over all non-oracle cases")
    lines.append(f"  cases: {g['cases']}")
    lines.append(f"  mean oracle revenue:       {g['mean_oracle_revenue']:12.2f}")
    lines.append(f"  mean misspecified revenue: {g['mean_misspec_revenue']:12.2f}")
    lines.append(f"  mean abs. loss:            {g['mean_abs_loss']:12.2f}")
    lines.append(f"  median abs. loss:          {g['median_abs_loss']:12.2f}")
    lines.append(f"  ROM rel. loss:             {100 * g['rom_loss']:11.2f}%")
    lines.append(f"  90th pct ROM rel. loss:    {100 * g['p90_case_rom_loss']:11.2f}%")
    lines.append("")
    lines.append("Error-type ranking (pooled ROM)")
    for r in summary["error_type_ranking"]:
        lines.append(f"  {r['error_type']:<24} cases {r['cases']:>5}  "
                     f"mean abs. loss {r['mean_abs_loss']:10.2f}  "
                     f"ROM {100 * r['rom_loss']:6.2f}%")
    for grouping in ("deadline_regime", "inventory_level", "eta_level", "scenario"):
        if grouping not in summary["groups"]:
            continue
        lines.append("")
        lines.append(f"By {grouping}")
        for r in summary["groups"][grouping]:
            lines.append(f"  {str(r['group']):<24} cases {r['cases']:>5}  "
                         f"ROM {100 * r['rom_loss']:6.2f}%")
    s = summary["oracle_sanity"]
    lines.append("")
    lines.append("Oracle benchmark check (best distinct challenger per cell)")
    lines.append(f"  cells: {s['cells']}  degenerate: {s['degenerate_cells']}")
    lines.append(f"  raw reversal rate:         {100 * s['raw_reversal_rate']:11.2f}%")
    lines.append(f"  significant reversal rate: {100 * s['significant_reversal_rate']:11.2f}%")
    lines.append(f"  mean paired diff:          {s['mean_paired_diff']:12.2f}")
    lines.append(f"  min paired diff:           {s['min_paired_diff']:12.2f}")
    return "\n".join(lines)
