"""Experiment orchestration: preprocess, discover, train, evaluate.

One :func:`run_experiment` call walks the full roster: for each
frequency with a dataset, discover causal drivers (as required by the
requested variants), then train and score one model per (variant, lead)
cell.  Cells are independent: a failure in one is recorded and the rest
proceed, and with ``jobs > 1`` they run in a process pool.  Reports,
graphs, and checkpoints land in the configured output directory, and
every random draw descends from the one root seed, so identical configs
yield byte-identical report CSVs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    Frequency,
    SplitSpec,
    TimeSeriesDataset,
    apply_normalization,
    build_lag_windows,
    fit_normalization,
    impute,
    invert_normalization,
    load_csv,
    split_windows,
)
from .errors import (
    CausalcastError,
    ConfigError,
    DegeneratePercentage,
    DegenerateR2,
    InvalidArgument,
    ShapeError,
)
from .granger import FeatureMethod, FeatureSet, mvgc_test, results_to_dict, select_features_gc
from .nn import (
    Checkpoint,
    ModelConfig,
    TrainConfig,
    init_model,
    predict,
    save_checkpoint,
    train,
)
from .pcmci import run_pcmci_plus, select_features_pcmci

REPORT_COLUMNS = (
    "frequency",
    "variant",
    "lead",
    "rmse",
    "mae",
    "rmse_pct",
    "mae_pct",
    "r2",
    "n_test",
)

VARIANTS = (
    FeatureMethod.VANILLA,
    FeatureMethod.GC,
    FeatureMethod.PCMCI_PLUS,
    FeatureMethod.DPCMCI_PLUS,
)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _paired(pred, obs) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    o = np.asarray(obs, dtype=np.float64).reshape(-1)
    if p.shape != o.shape:
        raise ShapeError(
            f"prediction/observation length mismatch: {p.shape[0]} vs {o.shape[0]}"
        )
    if p.shape[0] == 0:
        raise InvalidArgument("metrics need at least one sample")
    return p, o


def rmse(pred, obs) -> float:
    p, o = _paired(pred, obs)
    return float(np.sqrt(np.mean((p - o) ** 2)))


def mae(pred, obs) -> float:
    p, o = _paired(pred, obs)
    return float(np.mean(np.abs(p - o)))


def r2(pred, obs) -> float:
    """1 - SS_res/SS_tot with SS_tot about the observation mean."""
    p, o = _paired(pred, obs)
    center = np.mean(o)
    ss_tot = float(np.sum((o - center) ** 2))
    if ss_tot == 0.0:
        raise DegenerateR2("observations are constant")
    ss_res = float(np.sum((p - o) ** 2))
    return 1.0 - ss_res / ss_tot


def percentage_metrics(rmse_value: float, mae_value: float, obs) -> tuple[float, float]:
    """Errors as percent of the mean observation (the report's % columns)."""
    o = np.asarray(obs, dtype=np.float64).reshape(-1)
    if o.shape[0] == 0:
        raise InvalidArgument("metrics need at least one sample")
    center = float(np.mean(o))
    if center == 0.0:
        raise DegeneratePercentage("observation mean is zero")
    return 100.0 * rmse_value / center, 100.0 * mae_value / center


# ---------------------------------------------------------------------------
# configuration and report types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    target: str
    split: SplitSpec
    output_dir: str
    daily_path: str | None = None
    monthly_path: str | None = None
    frequencies: tuple[Frequency, ...] = ()
    lookback: int = 21
    leads: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    variants: tuple[FeatureMethod, ...] = VARIANTS
    gc_alpha: float = 0.05
    pcmci_alpha: float = 0.05
    discovery_max_lag: int = 21
    daily_steps_per_month: int = 30
    max_samples: int | None = 8000
    gru_units: int = 64
    lstm_units: int = 128
    dense_units: int = 64
    dropout_rate: float = 0.2
    train: TrainConfig = TrainConfig()
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "leads", tuple(int(l) for l in self.leads))
        try:
            object.__setattr__(
                self, "variants", tuple(FeatureMethod(v) for v in self.variants)
            )
        except ValueError:
            raise ConfigError(
                f"unknown variant in {list(self.variants)}; choose from "
                f"{[m.value for m in VARIANTS]}"
            )
        if not self.leads or any(l < 1 for l in self.leads):
            raise ConfigError("leads must be a non-empty list of integers >= 1")
        if not self.variants:
            raise ConfigError("variants must be non-empty")
        if len(set(self.variants)) != len(self.variants):
            raise ConfigError("duplicate variants")
        if self.daily_path is None and self.monthly_path is None:
            raise ConfigError("at least one of daily/monthly datasets required")
        # frequencies = which datasets get trained/reported on; a dataset
        # outside the roster is still available to discovery (dpcmci+)
        freqs = tuple(Frequency(f) for f in self.frequencies)
        if not freqs:
            freqs = tuple(
                f
                for f in (Frequency.DAILY, Frequency.MONTHLY)
                if self.path_for(f) is not None
            )
        object.__setattr__(self, "frequencies", freqs)
        for f in self.frequencies:
            if self.path_for(f) is None:
                raise ConfigError(
                    f"frequency {f.value!r} listed but no dataset path given"
                )
        if FeatureMethod.DPCMCI_PLUS in self.variants:
            if Frequency.MONTHLY not in self.frequencies:
                raise ConfigError(
                    f"variant {FeatureMethod.DPCMCI_PLUS.value!r} trains on "
                    "monthly data: monthly dataset required"
                )
            if self.daily_path is None:
                raise ConfigError(
                    f"variant {FeatureMethod.DPCMCI_PLUS.value!r} discovers "
                    "features on daily data: daily dataset required"
                )
        if self.daily_steps_per_month < 1:
            raise ConfigError("daily_steps_per_month must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def path_for(self, frequency: Frequency) -> str | None:
        return (
            self.daily_path
            if frequency is Frequency.DAILY
            else self.monthly_path
        )

    def lead_steps(self, frequency: Frequency, lead: int) -> int:
        """Lead times are stated in months; daily data needs them in steps."""
        if frequency is Frequency.DAILY:
            return lead * self.daily_steps_per_month
        return lead


@dataclass(frozen=True)
class EvalRecord:
    frequency: str
    variant: str
    lead: int
    rmse: float
    mae: float
    rmse_pct: float
    mae_pct: float
    r2: float
    n_test: int

    def to_dict(self) -> dict:
        return {c: getattr(self, c) for c in REPORT_COLUMNS}


@dataclass(frozen=True)
class EvalReport:
    records: tuple[EvalRecord, ...]
    failures: tuple[dict, ...] = ()
    artifacts: tuple[str, ...] = ()

    def __post_init__(self):
        for rec in self.records:
            if not (rec.rmse >= 0.0 and rec.mae >= 0.0):
                raise InvalidArgument("negative error metric")
            if rec.r2 > 1.0:
                raise InvalidArgument("r2 above 1")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for rec in self.records:
            writer.writerow(
                [
                    rec.frequency,
                    rec.variant,
                    rec.lead,
                    repr(rec.rmse),
                    repr(rec.mae),
                    repr(rec.rmse_pct),
                    repr(rec.mae_pct),
                    repr(rec.r2),
                    rec.n_test,
                ]
            )
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "records": [rec.to_dict() for rec in self.records],
            "failures": list(self.failures),
            "artifacts": list(self.artifacts),
        }

    def r2_series_csv(self, frequency: str) -> str:
        """Plot-ready lead-vs-R2 table, one column per variant."""
        variants = []
        for rec in self.records:
            if rec.frequency == frequency and rec.variant not in variants:
                variants.append(rec.variant)
        leads = sorted(
            {rec.lead for rec in self.records if rec.frequency == frequency}
        )
        cell = {
            (rec.lead, rec.variant): rec.r2
            for rec in self.records
            if rec.frequency == frequency
        }
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lead"] + variants)
        for lead in leads:
            row = [lead]
            for v in variants:
                value = cell.get((lead, v))
                row.append("" if value is None else repr(value))
            writer.writerow(row)
        return buf.getvalue()


def derive_seed(root: int, label: str) -> int:
    """Stable per-stage child seed from the one root seed."""
    digest = hashlib.sha256(f"{root}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------

def _prepare(raw: TimeSeriesDataset, split: SplitSpec):
    stats = fit_normalization(raw, split)
    return stats, apply_normalization(raw, stats)


def _discover_features(config: ExperimentConfig, datasets: dict, out: Path):
    """FeatureSet (or caught error) per (frequency, variant), plus the
    artifact files discovery writes.

    Discovery runs on the imputed, un-normalized series; both tests are
    invariant to per-variable affine rescaling, so normalization would
    change nothing but the stored statistics.
    """
    features: dict[tuple[Frequency, FeatureMethod], FeatureSet | Exception] = {}
    artifacts: list[str] = []
    pcmci_cache: dict[Frequency, object] = {}

    def pcmci_graph(freq: Frequency):
        if freq not in pcmci_cache:
            graph = run_pcmci_plus(
                datasets[freq],
                max_lag=config.discovery_max_lag,
                pc_alpha=config.pcmci_alpha,
                max_samples=config.max_samples,
            )
            json_path = out / f"graph_{freq.value}_pcmci.json"
            dot_path = out / f"graph_{freq.value}_pcmci.dot"
            graph.save(json_path)
            dot_path.write_text(graph.to_dot())
            artifacts.extend([str(json_path), str(dot_path)])
            pcmci_cache[freq] = graph
        return pcmci_cache[freq]

    for freq in config.frequencies:
        dataset = datasets[freq]
        for variant in _roster(config, freq):
            try:
                if variant is FeatureMethod.VANILLA:
                    fs = FeatureSet(variant, dataset.variable_names)
                elif variant is FeatureMethod.GC:
                    results = mvgc_test(
                        dataset,
                        max_lag=config.discovery_max_lag,
                        alpha=config.gc_alpha,
                    )
                    gpath = out / f"granger_{freq.value}.json"
                    gpath.write_text(
                        json.dumps(
                            results_to_dict(
                                results,
                                dataset,
                                max_lag=config.discovery_max_lag,
                                alpha=config.gc_alpha,
                            ),
                            indent=2,
                        )
                        + "\n"
                    )
                    artifacts.append(str(gpath))
                    fs = select_features_gc(results, dataset)
                elif variant is FeatureMethod.PCMCI_PLUS:
                    fs = select_features_pcmci(
                        pcmci_graph(freq), config.target
                    )
                else:  # dpcmci+: daily-discovered drivers, monthly columns
                    daily_fs = select_features_pcmci(
                        pcmci_graph(Frequency.DAILY), config.target
                    )
                    monthly = datasets[Frequency.MONTHLY]
                    fs = FeatureSet(
                        FeatureMethod.DPCMCI_PLUS,
                        tuple(
                            v
                            for v in monthly.variable_names
                            if v in set(daily_fs.features)
                        ),
                    )
                features[(freq, variant)] = fs
            except CausalcastError as exc:
                features[(freq, variant)] = exc
    return features, artifacts


def _roster(config: ExperimentConfig, frequency: Frequency):
    return [
        v
        for v in config.variants
        if v is not FeatureMethod.DPCMCI_PLUS or frequency is Frequency.MONTHLY
    ]


def _run_cell(args) -> tuple[EvalRecord | None, dict | None, str | None]:
    """Train and score one (frequency, variant, lead) cell.

    Module-level so a process pool can pickle it.  Returns
    (record, failure, checkpoint_path); exactly one of record/failure is
    set.
    """
    (config, freq, variant, feature_set, lead, normalized, stats, out_dir) = args
    label = f"{freq.value}:{variant.value}:lead{lead}"
    try:
        if isinstance(feature_set, Exception):
            raise feature_set
        windows = build_lag_windows(
            normalized,
            feature_set.features,
            lookback=config.lookback,
            lead=config.lead_steps(freq, lead),
        )
        train_w, val_w, test_w = split_windows(windows, config.split)
        seed = derive_seed(config.seed, label)
        model = init_model(
            ModelConfig(
                feature_count=len(feature_set.features),
                lookback=config.lookback,
                gru_units=config.gru_units,
                lstm_units=config.lstm_units,
                dense_units=config.dense_units,
                dropout_rate=config.dropout_rate,
            ),
            seed=seed,
        )
        train_config = TrainConfig(
            batch_size=config.train.batch_size,
            max_epochs=config.train.max_epochs,
            patience=config.train.patience,
            learning_rate=config.train.learning_rate,
            seed=seed,
        )
        model, _ = train(model, train_w, val_w, train_config)
        pred = invert_normalization(
            predict(model, test_w.inputs), stats, config.target
        )
        obs = invert_normalization(test_w.targets, stats, config.target)
        rmse_value = rmse(pred, obs)
        mae_value = mae(pred, obs)
        rmse_pct, mae_pct = percentage_metrics(rmse_value, mae_value, obs)
        record = EvalRecord(
            frequency=freq.value,
            variant=variant.value,
            lead=lead,
            rmse=rmse_value,
            mae=mae_value,
            rmse_pct=rmse_pct,
            mae_pct=mae_pct,
            r2=r2(pred, obs),
            n_test=test_w.n_samples,
        )
        ck_path = str(
            Path(out_dir) / f"model_{freq.value}_{variant.value}_lead{lead}.json"
        )
        save_checkpoint(
            ck_path,
            Checkpoint(
                model=model,
                features=feature_set.features,
                target=config.target,
                lead=lead,
                lead_steps=config.lead_steps(freq, lead),
                frequency=freq,
                normalization=stats,
                train_config=train_config,
                method=variant.value,
            ),
        )
        return record, None, ck_path
    except Exception as exc:  # isolate the cell, keep the experiment alive
        failure = {
            "frequency": freq.value,
            "variant": variant.value,
            "lead": lead,
            "error": f"{type(exc).__name__}: {exc}",
        }
        return None, failure, None


def run_experiment(config: ExperimentConfig) -> EvalReport:
    """Execute the full experiment roster and write all artifacts.

    Emits ``report.csv`` / ``report.json`` plus per-frequency
    ``r2_series_<frequency>.csv``, a causal-graph JSON/DOT pair per
    discovery run, and one checkpoint per trained cell, all under
    ``config.output_dir``.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    datasets: dict[Frequency, TimeSeriesDataset] = {}
    for freq in (Frequency.DAILY, Frequency.MONTHLY):
        path = config.path_for(freq)
        if path is not None:
            datasets[freq] = impute(load_csv(path, config.target, freq))

    features, artifacts = _discover_features(config, datasets, out)

    cells = []
    for freq in config.frequencies:
        stats, normalized = _prepare(datasets[freq], config.split)
        for variant in _roster(config, freq):
            for lead in config.leads:
                cells.append(
                    (
                        config,
                        freq,
                        variant,
                        features[(freq, variant)],
                        lead,
                        normalized,
                        stats,
                        str(out),
                    )
                )

    if config.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(cell) for cell in cells]

    records = []
    failures = []
    for record, failure, ck_path in outcomes:
        if record is not None:
            records.append(record)
            artifacts.append(ck_path)
        else:
            failures.append(failure)

    report = EvalReport(
        records=tuple(records),
        failures=tuple(failures),
        artifacts=tuple(artifacts),
    )
    csv_path = out / "report.csv"
    json_path = out / "report.json"
    csv_path.write_text(report.to_csv())
    series_paths = []
    for freq in (Frequency.DAILY, Frequency.MONTHLY):
        if any(rec.frequency == freq.value for rec in report.records):
            spath = out / f"r2_series_{freq.value}.csv"
            spath.write_text(report.r2_series_csv(freq.value))
            series_paths.append(str(spath))
    report = EvalReport(
        records=report.records,
        failures=report.failures,
        artifacts=tuple(
            list(report.artifacts) + [str(csv_path), str(json_path)] + series_paths
        ),
    )
    json_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report
