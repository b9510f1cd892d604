"""Command-line orchestration of the full experiment pipeline.

Subcommands: ``train``, ``analyze``, ``generate``, ``evaluate``,
``baseline``, ``report``. Every command takes a JSON experiment config and
writes its outputs (plus a ``config_echo.json`` recording the exact resolved
config and derived seeds) into an output directory, so any artifact can be
reproduced from the master seed alone. Exit codes: 0 success, 2 config
error, 3 data error, 4 training divergence.
"""

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import checkpoint, data, dbn, kmeans, plots, quality, rbm, rra
from .errors import ConfigError, DataError, DivergenceError
from .seeding import child_seed

LAYER_SCHEMA = "layerlens.layers.v1"
SPECTRUM_SCHEMA = "layerlens.spectrum.v1"
CURVE_SCHEMA = "layerlens.curve.v1"
EVALUATION_SCHEMA = "layerlens.evaluation.v1"
BASELINE_SCHEMA = "layerlens.baseline.v1"
METRICS_SCHEMA = "layerlens.train-metrics.v1"


# ---------------------------------------------------------------------------
# experiment configuration


@dataclasses.dataclass(frozen=True)
class DatasetConfig:
    format: str
    path: str | None = None
    images: str | None = None
    labels: str | None = None
    take: int | None = None
    control_mode: str | None = None
    image_shape: tuple | None = None

    def __post_init__(self):
        if self.format not in ("idx", "canonical", "ocr"):
            raise ConfigError(f"unknown dataset format {self.format!r}")
        if self.format == "idx" and not self.images:
            raise ConfigError("idx datasets need an 'images' path")
        if self.format in ("canonical", "ocr") and not self.path:
            raise ConfigError(f"{self.format} datasets need a 'path'")
        if self.take is not None and self.take < 1:
            raise ConfigError("'take' must be positive")
        if self.control_mode is not None and self.control_mode not in data.SHUFFLE_MODES:
            raise ConfigError(f"unknown control mode {self.control_mode!r}")


@dataclasses.dataclass(frozen=True)
class EvaluationConfig:
    n_chains: int = 2000
    n_steps: int = 500
    mode: str = "mean_field"
    labeler: str = "svm"
    labeler_train_fraction: float = 0.9
    max_labeler_error: float = 0.05

    def __post_init__(self):
        if self.n_chains < 1 or self.n_steps < 1:
            raise ConfigError("n_chains and n_steps must be positive")
        if not 0.0 < self.labeler_train_fraction < 1.0:
            raise ConfigError("labeler_train_fraction must be in (0, 1)")


@dataclasses.dataclass(frozen=True)
class BaselineConfig:
    k_values: tuple = (4, 16, 64, 256, 1024, 4096)
    n_restarts: int = 3
    max_iters: int = 100


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    architecture: tuple
    train: rbm.TrainConfig
    evaluation: EvaluationConfig
    baseline: BaselineConfig
    seed: int
    output_dir: str

    def echo(self):
        """JSON-safe dump of the exact resolved configuration."""

        def plain(obj):
            if dataclasses.is_dataclass(obj):
                return {k: plain(v) for k, v in dataclasses.asdict(obj).items()}
            if isinstance(obj, (tuple, list)):
                return [plain(v) for v in obj]
            return obj

        return plain(self)


def _build_config(raw, overrides=None):
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    overrides = overrides or {}
    try:
        dataset_raw = dict(raw["dataset"])
        if "image_shape" in dataset_raw and dataset_raw["image_shape"] is not None:
            dataset_raw["image_shape"] = tuple(dataset_raw["image_shape"])
        dataset = DatasetConfig(**dataset_raw)
        architecture = tuple(int(v) for v in raw.get("architecture", ()))
        seed = int(overrides.get("seed", raw.get("seed", 0)))
        train_raw = dict(raw.get("train", {}))
        if "epochs" in overrides:
            train_raw["epochs"] = overrides["epochs"]
        train_raw["seed"] = child_seed(seed, "train")
        train = rbm.TrainConfig(**train_raw)
        evaluation = EvaluationConfig(**raw.get("evaluation", {}))
        baseline_raw = dict(raw.get("baseline", {}))
        if "k_values" in baseline_raw:
            baseline_raw["k_values"] = tuple(int(k) for k in baseline_raw["k_values"])
        baseline = BaselineConfig(**baseline_raw)
        output_dir = str(overrides.get("output_dir", raw.get("output_dir", "out")))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return ExperimentConfig(
        dataset=dataset,
        architecture=architecture,
        train=train,
        evaluation=evaluation,
        baseline=baseline,
        seed=seed,
        output_dir=output_dir,
    )


def load_config(path, overrides=None):
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return _build_config(raw, overrides)


def load_dataset(config):
    """Load (and optionally subset / control-shuffle) the configured dataset."""
    ds_cfg = config.dataset
    if ds_cfg.format == "idx":
        dataset = data.load_idx(ds_cfg.images, ds_cfg.labels)
    elif ds_cfg.format == "canonical":
        dataset = data.load_dataset(ds_cfg.path)
    else:
        dataset = data.load_ocr(ds_cfg.path)
    if ds_cfg.take is not None:
        if ds_cfg.take > dataset.n_samples:
            raise DataError(
                f"take={ds_cfg.take} exceeds dataset size {dataset.n_samples}"
            )
        spec = data.SplitSpec(ds_cfg.take, 0, 0)
        dataset = data.split(dataset, spec, child_seed(config.seed, "subset"))[0]
    if ds_cfg.control_mode is not None:
        dataset = data.shuffle_control(
            dataset, ds_cfg.control_mode, child_seed(config.seed, "control")
        )
    return dataset


def _image_shape(config, n_features):
    if config.dataset.image_shape is not None:
        return tuple(config.dataset.image_shape)
    side = int(round(math.sqrt(n_features)))
    if side * side == n_features:
        return (side, side)
    return (1, n_features)


# ---------------------------------------------------------------------------
# deterministic output helpers


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def _write_csv(path, schema, fieldnames, rows):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# schema={schema}\n")
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in fieldnames})


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _prepare_out(args, config):
    out = Path(args.output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_echo(out, config, seeds, command):
    _write_json(
        out / "config_echo.json",
        {"command": command, "config": config.echo(), "seeds": seeds},
    )


def _layer_rows(report, layer_sizes, class_errors=None):
    rows = []
    for p in report.points:
        rows.append(
            {
                "layer": p.layer_index,
                "size": layer_sizes[p.layer_index],
                "n_distinct_states": p.n_distinct_states,
                "resolution_nats": p.resolution,
                "relevance_nats": p.relevance,
                "resolution_norm": p.resolution_norm,
                "relevance_norm": p.relevance_norm,
                "resolution_bits": p.resolution / math.log(2),
                "relevance_bits": p.relevance / math.log(2),
                "beta": p.beta,
                "beta_stderr": p.beta_stderr,
                "fit_r_squared": p.fit_r_squared,
                "classification_error": (class_errors or {}).get(p.layer_index),
                "is_critical": int(p.layer_index == report.critical_layer),
            }
        )
    return rows


LAYER_FIELDS = [
    "layer",
    "size",
    "n_distinct_states",
    "resolution_nats",
    "relevance_nats",
    "resolution_norm",
    "relevance_norm",
    "resolution_bits",
    "relevance_bits",
    "beta",
    "beta_stderr",
    "fit_r_squared",
    "classification_error",
    "is_critical",
]


# ---------------------------------------------------------------------------
# commands


def cmd_train(args):
    config = load_config(args.config, _overrides(args))
    if not config.architecture:
        raise ConfigError("train requires a non-empty 'architecture'")
    dataset = load_dataset(config)
    out = _prepare_out(args, config)
    seeds = {
        "master": config.seed,
        "train": config.train.seed,
        "stacks": [
            child_seed(config.train.seed, "stack", i)
            for i in range(len(config.architecture))
        ],
    }

    history = []
    model = dbn.train_dbn(
        dataset,
        [dataset.n_features, *config.architecture],
        config.train,
        on_epoch=lambda stack, epoch, err: history.append((stack, epoch, err)),
    )

    _write_csv(
        out / "training_metrics.csv",
        METRICS_SCHEMA,
        ["stack", "epoch", "reconstruction_error"],
        [dict(zip(("stack", "epoch", "reconstruction_error"), row)) for row in history],
    )
    digest = checkpoint.history_digest(history)
    ckpt_path = out / "checkpoint.llckpt"
    checkpoint.save_checkpoint(
        ckpt_path, model, config_echo=config.echo(), seeds=seeds, digest=digest
    )
    _write_echo(out, config, seeds, "train")
    print(f"wrote {ckpt_path}")
    return 0


def _spectrum_and_fit(hist):
    spectrum = rra.degeneracy_spectrum(hist)
    try:
        fit = rra.fit_power_law(spectrum)
    except rra.FitError:
        fit = None
    return spectrum, fit


def cmd_analyze(args):
    config = load_config(args.config, _overrides(args))
    out = _prepare_out(args, config)
    seeds = {"master": config.seed}

    if args.states:
        states = [dbn.StateSet(rra.read_state_dump(args.states), layer_index=1)]
        report = rra.LayerReport(
            points=[rra.point_from_states(states[0])],
            critical_layer=1,
        )
        layer_sizes = {1: states[0].n_units}
        class_errors = {}
        total = states[0].n_samples
    else:
        if not args.checkpoint:
            raise ConfigError("analyze needs --checkpoint or --states")
        model, _header = checkpoint.load_checkpoint(args.checkpoint)
        dataset = load_dataset(config)
        if dataset.n_features != model.layer_sizes[0]:
            raise DataError(
                f"dataset has {dataset.n_features} features but the checkpoint "
                f"expects {model.layer_sizes[0]}"
            )
        states = dbn.layer_states(dataset, model)
        report = rra.layer_report(model, dataset, states=states)
        layer_sizes = dict(enumerate(model.layer_sizes))
        class_errors = {}
        if dataset.labels is not None:
            for s in states:
                class_errors[s.layer_index] = quality.classification_error(
                    s, dataset.labels
                )
        total = dataset.n_samples

    rows = _layer_rows(report, layer_sizes, class_errors)
    _write_csv(out / "layers.csv", LAYER_SCHEMA, LAYER_FIELDS, rows)
    _write_json(
        out / "layers.json",
        {
            "schema": LAYER_SCHEMA,
            "config": config.echo(),
            "seeds": seeds,
            "total_samples": total,
            "log_m": math.log(total),
            "critical_layer": report.critical_layer,
            "layers": rows,
        },
    )

    spectra_dir = out / "spectra"
    spectra_dir.mkdir(exist_ok=True)
    spectra_series = {}
    for state_set in states:
        hist = rra.count_states(state_set)
        spectrum, fit = _spectrum_and_fit(hist)
        _write_csv(
            spectra_dir / f"layer_{state_set.layer_index:02d}.csv",
            SPECTRUM_SCHEMA,
            ["k", "m_k"],
            [
                {"k": int(k), "m_k": int(m)}
                for k, m in zip(spectrum.k_values, spectrum.m_values)
            ],
        )
        spectra_series[f"H{state_set.layer_index}"] = (spectrum, fit)

    curve = rra.max_relevance_curve(total)
    _write_csv(
        out / "max_relevance_curve.csv",
        CURVE_SCHEMA,
        ["beta", "resolution_nats", "relevance_nats"],
        [
            {"beta": float(b), "resolution_nats": float(r), "relevance_nats": float(v)}
            for b, r, v in zip(curve.beta_values, curve.resolution, curve.relevance)
        ],
    )

    plot_dir = out / "plots"
    plot_dir.mkdir(exist_ok=True)
    echo = config.echo()
    plots.entropy_plane(
        plot_dir / "entropy_plane.svg", {"layers": report.points}, curve, echo
    )
    shown = {
        label: spectra_series[label]
        for label in list(spectra_series)[:: max(1, len(spectra_series) // 4)]
    }
    plots.spectra(plot_dir / "spectra.svg", shown, echo)
    plots.beta_by_layer(plot_dir / "beta_by_layer.svg", {"layers": report.points}, echo)

    _write_echo(out, config, seeds, "analyze")
    print(f"wrote {out / 'layers.csv'}")
    return 0


def cmd_generate(args):
    config = load_config(args.config, _overrides(args))
    if not args.checkpoint:
        raise ConfigError("generate needs --checkpoint")
    model, _ = checkpoint.load_checkpoint(args.checkpoint)
    layer = args.layer
    if not 1 <= layer <= model.depth:
        raise ConfigError(f"--layer must be in 1..{model.depth}")
    out = _prepare_out(args, config)
    eval_cfg = config.evaluation
    seeds = {
        "master": config.seed,
        "equilibrate": child_seed(config.seed, "generate-cmd", "equilibrate", layer),
        "generate": child_seed(config.seed, "generate-cmd", "visible", layer),
    }

    states = dbn.gibbs_equilibrate(
        model, layer, eval_cfg.n_steps, eval_cfg.n_chains, seeds["equilibrate"]
    )
    visible = dbn.generate_visible(model, states, eval_cfg.mode, seeds["generate"])
    generated = data.Dataset(
        samples=np.clip(visible, 0.0, 1.0).astype(np.float32),
        name=f"generated-layer{layer}",
        seed_provenance=config.seed,
    )
    data.save_dataset(out / "generated.llds", generated)

    report = {
        "schema": EVALUATION_SCHEMA,
        "layer": layer,
        "n_chains": eval_cfg.n_chains,
        "n_steps": eval_cfg.n_steps,
        "mode": eval_cfg.mode,
        "seeds": seeds,
        "config": config.echo(),
    }
    if not args.no_labels:
        dataset = load_dataset(config)
        if dataset.labels is not None:
            labeler, p_dist = _trained_labeler(config, dataset)
            labels = labeler.predict(generated.samples)
            counts = np.bincount(labels, minlength=labeler.n_labels)
            q = quality.LabelDistribution.from_counts(counts)
            ability = quality.generation_ability(p_dist, q)
            report["label_counts"] = [int(c) for c in counts]
            report["generation_ability"] = _ability_json(ability)
            report["labeler_validation_error"] = labeler.validation_error

    _write_json(out / "generation.json", report)
    plots.sample_grid(
        out / "sample_grid.svg",
        generated.samples[:64],
        _image_shape(config, generated.n_features),
        config_echo=config.echo(),
    )
    _write_echo(out, config, seeds, "generate")
    print(f"wrote {out / 'generation.json'}")
    return 0


def _trained_labeler(config, dataset):
    eval_cfg = config.evaluation
    n_train = int(round(dataset.n_samples * eval_cfg.labeler_train_fraction))
    n_val = dataset.n_samples - n_train
    if n_train < 1 or n_val < 1:
        raise ConfigError("labeler_train_fraction leaves an empty split")
    train_ds, val_ds, _ = data.split(
        dataset,
        data.SplitSpec(n_train, n_val, 0),
        child_seed(config.seed, "labeler-split"),
    )
    labeler = quality.train_labeler(
        train_ds,
        val_ds,
        quality.LabelerConfig(
            kind=eval_cfg.labeler,
            seed=child_seed(config.seed, "labeler"),
            max_validation_error=eval_cfg.max_labeler_error,
        ),
    )
    p_dist = quality.LabelDistribution.from_labels(dataset.labels, labeler.n_labels)
    return labeler, p_dist


def _ability_json(result):
    return {
        "divergence": result.divergence,
        "ability": result.ability,
        "unbounded": result.unbounded,
    }


def cmd_evaluate(args):
    config = load_config(args.config, _overrides(args))
    if not args.checkpoint:
        raise ConfigError("evaluate needs --checkpoint")
    model, _ = checkpoint.load_checkpoint(args.checkpoint)
    dataset = load_dataset(config)
    if dataset.labels is None:
        raise DataError("evaluate needs a labeled dataset")
    out = _prepare_out(args, config)
    eval_cfg = config.evaluation
    seeds = {
        "master": config.seed,
        "evaluation": child_seed(config.seed, "evaluation"),
        "labeler": child_seed(config.seed, "labeler"),
    }

    labeler, _p = _trained_labeler(config, dataset)
    states = dbn.layer_states(dataset, model)
    report = rra.layer_report(model, dataset, states=states)
    class_errors = {
        s.layer_index: quality.classification_error(s, dataset.labels) for s in states
    }
    layer_results = quality.evaluate_generation(
        model,
        labeler,
        dataset,
        quality.GenerationEvalConfig(
            n_chains=eval_cfg.n_chains,
            n_steps=eval_cfg.n_steps,
            mode=eval_cfg.mode,
            seed=seeds["evaluation"],
        ),
    )

    rows = []
    for res in layer_results:
        point = report.point(res.layer_index)
        rows.append(
            {
                "layer": res.layer_index,
                "beta": point.beta,
                "ability": res.result.ability,
                "divergence": res.result.divergence,
                "unbounded": res.result.unbounded,
                "classification_error": class_errors[res.layer_index],
                "label_counts": [int(c) for c in res.label_counts],
                "critical": res.layer_index == report.critical_layer,
            }
        )
    _write_json(
        out / "evaluation.json",
        {
            "schema": EVALUATION_SCHEMA,
            "config": config.echo(),
            "seeds": seeds,
            "labeler_validation_error": labeler.validation_error,
            "critical_layer": report.critical_layer,
            "layers": rows,
        },
    )

    echo = config.echo()
    plots.ability_vs_beta(out / "ability_vs_beta.svg", rows, echo)
    grid_dir = out / "sample_grids"
    grid_dir.mkdir(exist_ok=True)
    shape = _image_shape(config, dataset.n_features)
    for res in layer_results:
        plots.sample_grid(
            grid_dir / f"layer_{res.layer_index:02d}.svg", res.preview, shape,
            config_echo=echo,
        )
    _write_echo(out, config, seeds, "evaluate")
    print(f"wrote {out / 'evaluation.json'}")
    return 0


def cmd_baseline(args):
    config = load_config(args.config, _overrides(args))
    dataset = load_dataset(config)
    out = _prepare_out(args, config)
    seeds = {"master": config.seed, "kmeans": child_seed(config.seed, "kmeans")}
    base_cfg = config.baseline

    rows = []
    log_m = math.log(dataset.n_samples)
    for k in base_cfg.k_values:
        clustering = kmeans.kmeans(
            dataset,
            k,
            max_iters=base_cfg.max_iters,
            n_restarts=base_cfg.n_restarts,
            seed=child_seed(seeds["kmeans"], "k", k),
        )
        hist = kmeans.clustering_histogram(clustering)
        h_s = rra.resolution_entropy(hist)
        h_k = rra.relevance_entropy(hist)
        _spectrum, fit = _spectrum_and_fit(hist)
        rows.append(
            {
                "k": k,
                "n_nonempty": len(hist.counts),
                "inertia": clustering.inertia,
                "resolution_nats": h_s,
                "relevance_nats": h_k,
                "resolution_norm": h_s / log_m,
                "relevance_norm": h_k / log_m,
                "beta": None if fit is None else fit.beta,
                "fit_r_squared": None if fit is None else fit.r_squared,
            }
        )
    _write_csv(
        out / "baseline.csv",
        BASELINE_SCHEMA,
        list(rows[0].keys()),
        rows,
    )
    _write_json(
        out / "baseline.json",
        {
            "schema": BASELINE_SCHEMA,
            "config": config.echo(),
            "seeds": seeds,
            "clusterings": rows,
        },
    )
    _write_echo(out, config, seeds, "baseline")
    print(f"wrote {out / 'baseline.csv'}")
    return 0


def cmd_report(args):
    out = Path(args.output_dir or "report")
    out.mkdir(parents=True, exist_ok=True)
    analysis = json.loads((Path(args.analysis) / "layers.json").read_text())
    summary = {
        "schema": "layerlens.summary.v1",
        "critical_layer": analysis["critical_layer"],
        "layers": analysis["layers"],
        "config": analysis["config"],
    }
    if args.evaluation:
        evaluation = json.loads((Path(args.evaluation) / "evaluation.json").read_text())
        by_layer = {row["layer"]: row for row in evaluation["layers"]}
        for row in summary["layers"]:
            if row["layer"] in by_layer:
                row["ability"] = by_layer[row["layer"]]["ability"]
                row["unbounded_ability"] = by_layer[row["layer"]]["unbounded"]
        summary["labeler_validation_error"] = evaluation["labeler_validation_error"]
        plots.ability_vs_beta(
            out / "ability_vs_beta.svg", evaluation["layers"], evaluation["config"]
        )
    _write_json(out / "summary.json", summary)
    print(f"wrote {out / 'summary.json'}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _overrides(args):
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "output_dir", None) is not None:
        overrides["output_dir"] = args.output_dir
    if getattr(args, "epochs", None) is not None:
        overrides["epochs"] = args.epochs
    return overrides


def build_parser():
    parser = argparse.ArgumentParser(
        prog="layerlens",
        description="Train stacked Boltzmann machines and score their layers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint_flag=False):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None, help="override master seed")
        p.add_argument("--output-dir", default=None, help="override output directory")
        if checkpoint_flag:
            p.add_argument("--checkpoint", default=None, help="model checkpoint path")

    p = sub.add_parser("train", help="train the full stack and write a checkpoint")
    common(p)
    p.add_argument("--epochs", type=int, default=None, help="override training epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="per-layer entropy / power-law report")
    common(p, checkpoint_flag=True)
    p.add_argument("--states", default=None, help="analyze an external state dump instead")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("generate", help="equilibrate one layer and generate samples")
    common(p, checkpoint_flag=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--no-labels", action="store_true", help="skip the label report")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="generation ability of every layer")
    common(p, checkpoint_flag=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="k-means clustering control")
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("report", help="combine analysis/evaluation outputs")
    p.add_argument("--analysis", required=True, help="directory written by analyze")
    p.add_argument("--evaluation", default=None, help="directory written by evaluate")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
