"""Experiment orchestration: sweep plans, result rows, CSV/JSON/SVG emission.

A plan is a cross product of cells (statistic x mechanism x setting x profile
x epsilon) evaluated on stratified samples of one dataset. Runs are
deterministic given the plan seed: per-profile sample seeds and per-cell
estimator seeds are derived from it, and estimator seeds deliberately do not
depend on the profile or on epsilon, so noise realizations are shared across
those axes (common random numbers). That makes epsilon sweeps smooth and
paired-profile comparisons difference out the noise.

CSV schema (stable, one header line, rows sorted by the key tuple):

    dataset,statistic,mechanism,setting,profile,epsilon,delta,trials,
    emse,tmse,cmse,sd_emse,sd_tmse,ci_half_width,true_value,
    dispersion_min,dispersion_mean,q_min,q_mean,i_squared_min,i_squared_mean

Key fields are strings/numbers; floats are written as their shortest
round-tripping decimal form, so parsing the file reconstructs every row
exactly. The companion plan log (<csv stem>.plan.json) records the resolved
plan: every derived seed, budget split, and floor needed to recompute any row.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

from hetdp.datasets import (
    DatasetDescriptor,
    HeterogeneityProfile,
    SampleCapacityError,
    load_dataset,
    stratified_sample,
)
from hetdp.errors import derive_seed, error_report
from hetdp.estimators import EstimatorConfig, Setting, Statistic
from hetdp.gaussian import Mechanism, PrivacyBudget
from hetdp.measures import VARIANCE_FLOOR, build_context, measure_all

#: Default privacy grid for epsilon sweeps, log-ish spacing over [0.25, 5].
DEFAULT_EPSILON_GRID: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0)
#: Default additive parameter for sweeps.
SWEEP_DELTA = 1e-5
#: Defaults for fixed-privacy (non-sweep) runs.
FIXED_EPSILON = 0.25
FIXED_DELTA = 0.1
DEFAULT_TRIALS = 100

_SAMPLE_TAG = 1
_CELL_TAG = 2

#: Fixed enum orders so derived seeds do not depend on plan ordering.
_STAT_ORDER = tuple(Statistic)
_MECH_ORDER = tuple(Mechanism)
_SETTING_ORDER = tuple(Setting)


@dataclass(frozen=True)
class ExperimentPlan:
    """One dataset, a set of named profiles, and the cell cross product."""

    dataset: DatasetDescriptor
    profiles: tuple[tuple[str, HeterogeneityProfile], ...]
    statistics: tuple[Statistic, ...]
    mechanisms: tuple[Mechanism, ...]
    settings: tuple[Setting, ...]
    epsilons: tuple[float, ...]
    delta: float
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    zero_noise: bool = False
    budget_fractions: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.profiles:
            raise ValueError("plan needs at least one profile")
        names = [name for name, _ in self.profiles]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate profile names: {names}")
        if not self.statistics or not self.mechanisms or not self.settings:
            raise ValueError("plan needs at least one statistic, mechanism and setting")
        if not self.epsilons or any(e <= 0 for e in self.epsilons):
            raise ValueError(f"epsilons must be nonempty and positive, got {self.epsilons}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.budget_fractions is not None:
            parts = {s.budget_parts for s in self.statistics}
            if parts != {len(self.budget_fractions)}:
                raise ValueError(
                    f"budget split has {len(self.budget_fractions)} parts but the "
                    f"planned statistics need {sorted(parts)} parts"
                )


@dataclass(frozen=True)
class ResultRow:
    """One CSV row: plan-cell keys, error summary, and true-value columns.

    The six *_min/*_mean columns aggregate each true statistic over the
    plan's profiles and repeat on every row of the run.
    """

    dataset: str
    statistic: str
    mechanism: str
    setting: str
    profile: str
    epsilon: float
    delta: float
    trials: int
    emse: float
    tmse: float
    cmse: float
    sd_emse: float
    sd_tmse: float
    ci_half_width: float
    true_value: float
    dispersion_min: float
    dispersion_mean: float
    q_min: float
    q_mean: float
    i_squared_min: float
    i_squared_mean: float

    def key(self) -> tuple:
        return (
            self.dataset,
            self.statistic,
            self.mechanism,
            self.setting,
            self.profile,
            self.epsilon,
        )


CSV_COLUMNS = (
    "dataset",
    "statistic",
    "mechanism",
    "setting",
    "profile",
    "epsilon",
    "delta",
    "trials",
    "emse",
    "tmse",
    "cmse",
    "sd_emse",
    "sd_tmse",
    "ci_half_width",
    "true_value",
    "dispersion_min",
    "dispersion_mean",
    "q_min",
    "q_mean",
    "i_squared_min",
    "i_squared_mean",
)

_FLOAT_COLUMNS = frozenset(CSV_COLUMNS) - {
    "dataset",
    "statistic",
    "mechanism",
    "setting",
    "profile",
    "trials",
}


@dataclass(frozen=True)
class ComparisonRow:
    """One percentage-change row of a heterogeneity comparison.

    kind "ratio" compares the skewed against the balanced profile at one
    label count (subject is the label count); kind "label_count" compares
    balanced profiles across label counts (subject like "10-vs-5"). The
    percentage is the signed change of EMSE averaged over the epsilon grid.
    """

    kind: str
    subject: str
    statistic: str
    mechanism: str
    setting: str
    pct_change_emse: float

    def key(self) -> tuple:
        return (self.kind, self.subject, self.statistic, self.mechanism, self.setting)


COMPARISON_COLUMNS = ("kind", "subject", "statistic", "mechanism", "setting", "pct_change_emse")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _sample_seed(plan: ExperimentPlan, profile: HeterogeneityProfile) -> int:
    """Seed for a profile's stratified draw, derived from the profile content.

    Content addressing (not list position) means identical profiles always
    receive identical samples, so a degenerate pair compares as exactly 0%.
    """
    frac_bits = int.from_bytes(struct.pack(">d", profile.sample_fraction), "big")
    return derive_seed(plan.seed, _SAMPLE_TAG, profile.label_count, frac_bits, *profile.ratios)


def _cell_seed(plan: ExperimentPlan, stat: Statistic, mech: Mechanism, setting: Setting) -> int:
    return derive_seed(
        plan.seed,
        _CELL_TAG,
        _STAT_ORDER.index(stat),
        _MECH_ORDER.index(mech),
        _SETTING_ORDER.index(setting),
    )


def _budget(plan: ExperimentPlan, stat: Statistic, epsilon: float) -> PrivacyBudget:
    if plan.budget_fractions is not None:
        return PrivacyBudget.from_fractions(epsilon, plan.delta, plan.budget_fractions)
    return PrivacyBudget.equal_split(epsilon, plan.delta, stat.budget_parts)


def _materialize_samples(plan: ExperimentPlan):
    """Load the dataset and draw one stratified sample per named profile."""
    data = load_dataset(plan.dataset)
    samples = {}
    for name, profile in plan.profiles:
        try:
            sample = stratified_sample(data, profile, seed=_sample_seed(plan, profile))
        except SampleCapacityError as err:
            raise SampleCapacityError(f"profile {name}: {err}") from err
        samples[name] = (sample, build_context(sample))
    return samples


def _true_value_table(samples) -> dict[str, dict[str, float]]:
    table = {}
    for name, (sample, _ctx) in samples.items():
        report, _ = measure_all(sample)
        table[name] = {
            "dispersion": report.dispersion,
            "q": report.q_value,
            "i_squared": report.i_squared,
        }
    return table


def run_experiment(
    plan: ExperimentPlan,
    csv_path: str | Path,
    svg_dir: str | Path | None = None,
) -> list[ResultRow]:
    """Evaluate every plan cell, then write the CSV, plan log, and charts.

    Returns the rows (sorted by key). Cells are independent; the output is a
    deterministic ordered reduction regardless of evaluation order.
    """
    samples = _materialize_samples(plan)
    true_table = _true_value_table(samples)
    mins = {s: min(v[s] for v in true_table.values()) for s in ("dispersion", "q", "i_squared")}
    means = {
        s: sum(v[s] for v in true_table.values()) / len(true_table)
        for s in ("dispersion", "q", "i_squared")
    }

    rows: list[ResultRow] = []
    for stat in plan.statistics:
        for mech in plan.mechanisms:
            for setting in plan.settings:
                seed = _cell_seed(plan, stat, mech, setting)
                for name, _profile in plan.profiles:
                    sample, ctx = samples[name]
                    for epsilon in plan.epsilons:
                        cfg = EstimatorConfig(
                            mechanism=mech,
                            setting=setting,
                            budget=_budget(plan, stat, epsilon),
                            seed=seed,
                            zero_noise=plan.zero_noise,
                        )
                        report = error_report(stat, sample, cfg, plan.trials, ctx=ctx)
                        rows.append(
                            ResultRow(
                                dataset=plan.dataset.name,
                                statistic=stat.value,
                                mechanism=mech.value,
                                setting=setting.value,
                                profile=name,
                                epsilon=epsilon,
                                delta=plan.delta,
                                trials=plan.trials,
                                emse=report.emse,
                                tmse=report.tmse,
                                cmse=report.cmse,
                                sd_emse=report.sd_emse,
                                sd_tmse=report.sd_tmse,
                                ci_half_width=report.ci_half_width,
                                true_value=true_table[name][stat.value],
                                dispersion_min=mins["dispersion"],
                                dispersion_mean=means["dispersion"],
                                q_min=mins["q"],
                                q_mean=means["q"],
                                i_squared_min=mins["i_squared"],
                                i_squared_mean=means["i_squared"],
                            )
                        )
    rows.sort(key=ResultRow.key)
    write_result_csv(rows, csv_path)
    write_plan_log(plan, csv_path)
    if svg_dir is not None:
        write_emse_charts(rows, plan, svg_dir)
    return rows


def write_result_csv(rows: list[ResultRow], path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            record = asdict(row)
            writer.writerow([_fmt(record[col]) for col in CSV_COLUMNS])


def read_result_csv(path: str | Path) -> list[ResultRow]:
    """Parse an emitted CSV back into exact ResultRows."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}: {reader.fieldnames}")
        for record in reader:
            kwargs = {}
            for col in CSV_COLUMNS:
                if col in _FLOAT_COLUMNS:
                    kwargs[col] = float(record[col])
                elif col == "trials":
                    kwargs[col] = int(record[col])
                else:
                    kwargs[col] = record[col]
            rows.append(ResultRow(**kwargs))
    return rows


def write_plan_log(plan: ExperimentPlan, csv_path: str | Path) -> Path:
    """Write the resolved plan (all derived seeds, splits, floors) as JSON."""
    log_path = Path(csv_path).with_suffix(".plan.json")
    desc = plan.dataset
    resolved = {
        "dataset": {
            "format": desc.format.value,
            "name": desc.name,
            "paths": list(desc.paths),
            "d": desc.d,
            "label_scheme": desc.label_scheme.value,
            "synth_n": desc.synth_n,
            "heterogeneity": desc.heterogeneity,
            "synth_seed": desc.synth_seed,
        },
        "profiles": [
            {
                "name": name,
                "ratios": list(profile.ratios),
                "label_count": profile.label_count,
                "sample_fraction": profile.sample_fraction,
                "sample_seed": _sample_seed(plan, profile),
            }
            for name, profile in plan.profiles
        ],
        "statistics": [s.value for s in plan.statistics],
        "mechanisms": [m.value for m in plan.mechanisms],
        "settings": [s.value for s in plan.settings],
        "epsilons": list(plan.epsilons),
        "delta": plan.delta,
        "trials": plan.trials,
        "seed": plan.seed,
        "zero_noise": plan.zero_noise,
        "budget_fractions": list(plan.budget_fractions) if plan.budget_fractions else None,
        "budget_rule": "equal split with exact-remainder last part"
        if plan.budget_fractions is None
        else "explicit fractions",
        "variance_floor": VARIANCE_FLOOR,
        "cell_seeds": [
            {
                "statistic": stat.value,
                "mechanism": mech.value,
                "setting": setting.value,
                "seed": _cell_seed(plan, stat, mech, setting),
            }
            for stat in plan.statistics
            for mech in plan.mechanisms
            for setting in plan.settings
        ],
    }
    log_path.write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    return log_path


def run_heterogeneity_comparison(
    plan: ExperimentPlan, csv_path: str | Path
) -> list[ComparisonRow]:
    """Percentage change of EMSE across paired profiles, averaged over epsilon.

    The plan must contain exactly two profiles per label count: the balanced
    one (all ratios equal) is the baseline, the skewed one the subject. Also
    emits cross-label-count comparisons between the balanced profiles.

    Raises:
        ValueError: profiles do not pair up.
    """
    by_count: dict[int, list[tuple[str, HeterogeneityProfile]]] = {}
    for name, profile in plan.profiles:
        by_count.setdefault(profile.label_count, []).append((name, profile))
    for count, entries in sorted(by_count.items()):
        if len(entries) != 2:
            raise ValueError(
                f"label count {count} has {len(entries)} profiles; comparisons "
                "need exactly a balanced/skewed pair per label count"
            )

    def is_balanced(profile: HeterogeneityProfile) -> bool:
        return len(set(profile.ratios)) == 1

    pairs: dict[int, tuple[str, str]] = {}
    for count, entries in sorted(by_count.items()):
        balanced = [e for e in entries if is_balanced(e[1])]
        baseline = balanced[0] if balanced else entries[0]
        other = entries[1] if entries[0] is baseline else entries[0]
        pairs[count] = (baseline[0], other[0])

    samples = _materialize_samples(plan)

    def mean_emse(stat, mech, setting, profile_name) -> list[float]:
        sample, ctx = samples[profile_name]
        seed = _cell_seed(plan, stat, mech, setting)
        out = []
        for epsilon in plan.epsilons:
            cfg = EstimatorConfig(
                mechanism=mech,
                setting=setting,
                budget=_budget(plan, stat, epsilon),
                seed=seed,
                zero_noise=plan.zero_noise,
            )
            out.append(error_report(stat, sample, cfg, plan.trials, ctx=ctx).emse)
        return out

    rows: list[ComparisonRow] = []
    for stat in plan.statistics:
        for mech in plan.mechanisms:
            for setting in plan.settings:
                base_curves: dict[int, list[float]] = {}
                for count, (base_name, other_name) in sorted(pairs.items()):
                    base = mean_emse(stat, mech, setting, base_name)
                    other = mean_emse(stat, mech, setting, other_name)
                    base_curves[count] = base
                    pcts = [
                        0.0 if o == b else (o - b) / b * 100.0
                        for b, o in zip(base, other)
                    ]
                    rows.append(
                        ComparisonRow(
                            kind="ratio",
                            subject=str(count),
                            statistic=stat.value,
                            mechanism=mech.value,
                            setting=setting.value,
                            pct_change_emse=sum(pcts) / len(pcts),
                        )
                    )
                counts = sorted(base_curves, reverse=True)
                for i, high in enumerate(counts):
                    for low in counts[i + 1 :]:
                        pcts = [
                            0.0 if o == b else (o - b) / b * 100.0
                            for b, o in zip(base_curves[high], base_curves[low])
                        ]
                        rows.append(
                            ComparisonRow(
                                kind="label_count",
                                subject=f"{high}-vs-{low}",
                                statistic=stat.value,
                                mechanism=mech.value,
                                setting=setting.value,
                                pct_change_emse=sum(pcts) / len(pcts),
                            )
                        )
    rows.sort(key=ComparisonRow.key)
    Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COMPARISON_COLUMNS)
        for row in rows:
            record = asdict(row)
            writer.writerow([_fmt(record[col]) for col in COMPARISON_COLUMNS])
    write_plan_log(plan, csv_path)
    return rows


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def emse_chart_svg(title: str, series: dict[str, list[tuple[float, float]]]) -> str:
    """Hand-rolled SVG line chart of EMSE (log y) against epsilon (linear x).

    Every series' points are embedded as an XML comment, so the chart is a
    self-describing, diffable artifact with no plotting dependency.
    """
    width, height = 640, 400
    left, right, top, bottom = 70, 20, 40, 50
    xs = sorted({x for pts in series.values() for x, _ in pts})
    positives = [y for pts in series.values() for _, y in pts if y > 0]
    if not xs:
        raise ValueError("chart needs at least one point")
    import math as _math

    x_lo, x_hi = min(xs), max(xs)
    x_span = (x_hi - x_lo) or 1.0
    if positives:
        exp_lo = _math.floor(_math.log10(min(positives)))
        exp_hi = _math.ceil(_math.log10(max(positives)))
        if exp_lo == exp_hi:
            exp_hi += 1
    else:
        exp_lo, exp_hi = 0, 1

    def x_px(x: float) -> float:
        return left + (x - x_lo) / x_span * (width - left - right)

    def y_px(y: float) -> float:
        if y <= 0:
            return height - bottom
        frac = (_math.log10(y) - exp_lo) / (exp_hi - exp_lo)
        return height - bottom - frac * (height - top - bottom)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<!-- {title} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" '
        f'y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
    ]
    for exp in range(exp_lo, exp_hi + 1):
        y = y_px(10.0**exp)
        parts.append(
            f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">1e{exp}</text>'
        )
    for x in xs:
        px = x_px(x)
        parts.append(
            f'<line x1="{px:.1f}" y1="{height - bottom}" x2="{px:.1f}" '
            f'y2="{height - bottom + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px:.1f}" y="{height - bottom + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{x:.6g}</text>'
        )
    parts.append(
        f'<text x="{(left + width - right) / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">epsilon</text>'
    )
    for index, (label, pts) in enumerate(sorted(series.items())):
        color = _PALETTE[index % len(_PALETTE)]
        pts = sorted(pts)
        data = " ".join(f"{x:.6g},{y:.6g}" for x, y in pts)
        parts.append(f"<!-- series {label}: {data} -->")
        polyline = " ".join(f"{x_px(x):.1f},{y_px(y):.1f}" for x, y in pts)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{polyline}"/>'
        )
        for x, y in pts:
            parts.append(
                f'<circle cx="{x_px(x):.1f}" cy="{y_px(y):.1f}" r="2.5" fill="{color}"/>'
            )
        ly = top + 16 * index
        parts.append(
            f'<line x1="{width - right - 150}" y1="{ly}" x2="{width - right - 130}" '
            f'y2="{ly}" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{width - right - 124}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_emse_charts(
    rows: list[ResultRow], plan: ExperimentPlan, svg_dir: str | Path
) -> list[Path]:
    """One EMSE-vs-epsilon chart per statistic, one line per
    (profile, mechanism, setting)."""
    svg_dir = Path(svg_dir)
    svg_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for stat in plan.statistics:
        series: dict[str, list[tuple[float, float]]] = {}
        for row in rows:
            if row.statistic != stat.value:
                continue
            label = f"{row.profile}/{row.mechanism}/{row.setting}"
            series.setdefault(label, []).append((row.epsilon, row.emse))
        if not series:
            continue
        title = f"EMSE vs epsilon: {stat.value} on {plan.dataset.name}"
        path = svg_dir / f"emse_{stat.value}_{plan.dataset.name}.svg"
        path.write_text(emse_chart_svg(title, series))
        written.append(path)
    return written
