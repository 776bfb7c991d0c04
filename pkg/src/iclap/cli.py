"""Command-line interface: dataset generation, codebook fitting, classification,
leave-one-out evaluation and weight sweeps.

A JSON config file (--config) is the source of truth; command-line flags
override it. Seeds fall back to the ICLAP_SEED environment variable. All
output files are written atomically (temp file + rename) and never mutate an
existing dataset in place.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import json
import os
import sys
import tempfile

import click
import numpy as np

from . import dataset as ds
from .codebook import (
    EXTRACTORS,
    extract_features,
    assign_labels,
    fit_codebook,
    histogram_from_labels,
    load_codebook,
    save_codebook,
)
from .errors import (
    ClassificationError,
    ConfigError,
    DimensionError,
    EmptyCloud,
    FormatError,
    IclapError,
    InsufficientData,
    NumericalFailure,
)
from .evaluation import leave_one_out, method_name, run_loo, weight_sweep
from .fusion import FusionSpec, fuse
from .recognition import (
    BASE_METHODS,
    METHOD_BOW,
    METHOD_ICLAP,
    METHOD_ICP,
    ModelLibrary,
    ObjectModel,
    classify_bow,
    classify_icp,
    classify_iclap,
    decide,
    load_library,
    save_library,
)
from .registration import RegistrationConfig

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_method(spec: str):
    """Parse a method string: a base name, "product:A,B" or
    "weighted_sum:A=0.7,B=0.3"."""
    spec = spec.strip()
    if ":" not in spec:
        if spec not in BASE_METHODS:
            raise ConfigError(f"unknown method {spec!r}; valid: {list(BASE_METHODS)} "
                              f"or weighted_sum:/product: fusion specs")
        return spec
    mode, _, rest = spec.partition(":")
    mode = mode.strip()
    parts = [p.strip() for p in rest.split(",") if p.strip()]
    if mode == "product":
        return FusionSpec(mode="product", inputs=tuple(parts))
    if mode == "weighted_sum":
        inputs, weights = [], []
        for part in parts:
            if "=" not in part:
                raise ConfigError(f"weighted_sum inputs need weights, got {part!r}")
            name, _, w = part.partition("=")
            inputs.append(name.strip())
            try:
                weights.append(float(w))
            except ValueError:
                raise ConfigError(f"bad weight {w!r} in {spec!r}") from None
        return FusionSpec(mode="weighted_sum", inputs=tuple(inputs), weights=tuple(weights))
    raise ConfigError(f"unknown fusion mode {mode!r}; valid: weighted_sum, product")


def parse_methods(spec: str) -> list:
    """Parse a method list: ";"-separated method specs. A plain comma-
    separated list of base names is also accepted, but fusion specs contain
    commas themselves and therefore need the semicolon form."""
    sep = ";" if (";" in spec or ":" in spec) else ","
    chunks = [c for c in (c.strip() for c in spec.split(sep)) if c]
    if not chunks:
        raise ConfigError(f"no methods in {spec!r}")
    return [parse_method(c) for c in chunks]


def parse_touches(spec: str) -> tuple:
    """Parse "1:20", "1,5,10" or combinations thereof."""
    out = []
    for chunk in str(spec).split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" in chunk:
            lo, _, hi = chunk.partition(":")
            try:
                out.extend(range(int(lo), int(hi) + 1))
            except ValueError:
                raise ConfigError(f"bad touch range {chunk!r}") from None
        else:
            try:
                out.append(int(chunk))
            except ValueError:
                raise ConfigError(f"bad touch count {chunk!r}") from None
    if not out:
        raise ConfigError(f"no touch counts in {spec!r}")
    return tuple(out)


class Settings:
    """Layered option resolution: flag > config[command] > config > default."""

    def __init__(self, config_path: str | None):
        self.config = {}
        if config_path:
            try:
                with open(config_path) as fh:
                    self.config = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
            if not isinstance(self.config, dict):
                raise ConfigError(f"config {config_path} must hold a JSON object")

    def get(self, command: str, key: str, flag_value, default):
        if flag_value is not None:
            return flag_value
        section = self.config.get(command, {})
        if isinstance(section, dict) and key in section:
            return section[key]
        if key in self.config and not isinstance(self.config[key], dict):
            return self.config[key]
        return default

    def seed(self, command: str, flag_value) -> int:
        value = self.get(command, "seed", flag_value, None)
        if value is None:
            value = os.environ.get("ICLAP_SEED", 0)
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"bad seed value {value!r}") from None


def _reg_config(st: Settings, command: str, max_iterations, error_tolerance,
                relative_change, label_scale) -> RegistrationConfig:
    return RegistrationConfig(
        max_iterations=int(st.get(command, "max_iterations", max_iterations, 50)),
        error_tolerance=float(st.get(command, "error_tolerance", error_tolerance, 1e-6)),
        relative_change_threshold=float(
            st.get(command, "relative_change_threshold", relative_change, 1e-4)),
        label_scale=float(st.get(command, "label_scale", label_scale, 1.0)),
    )


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file; flags override its values.")
@click.pass_context
def cli(ctx, config_path):
    """iCLAP: tactile-kinesthetic object recognition toolkit."""
    ctx.obj = Settings(config_path)


@cli.command("gen-data")
@click.option("--objects", type=int, default=None, help="Number of objects (default 20).")
@click.option("--trials", type=int, default=None, help="Exploration trials per object (default 5).")
@click.option("--frames", type=int, default=None, help="Frames per trial (default 30).")
@click.option("--noise", type=float, default=None, help="Pressure noise sigma (default 0.05).")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def cmd_gen_data(st: Settings, objects, trials, frames, noise, seed, out_dir):
    """Generate a synthetic exploration dataset."""
    objects = int(st.get("gen-data", "objects", objects, 20))
    trials = int(st.get("gen-data", "trials", trials, 5))
    frames = int(st.get("gen-data", "frames", frames, 30))
    noise = float(st.get("gen-data", "noise", noise, 0.05))
    seed = st.seed("gen-data", seed)
    if os.path.exists(os.path.join(out_dir, "manifest.json")):
        raise ConfigError(f"dataset already exists at {out_dir}; refusing to overwrite")
    suite = ds.generate_object_suite(objects, seed)
    traces = []
    for obj in suite:
        traces.extend(ds.simulate_exploration(obj, trials, frames, noise, seed))
    ds.save_dataset(traces, out_dir)
    click.echo(f"wrote {len(traces)} traces ({objects} objects x {trials} trials, "
               f"{frames} frames each, noise={noise:g}, seed={seed}) to {out_dir}")


@cli.command("fit-codebook")
@click.option("--dataset", "dataset_dir", type=click.Path(), required=True)
@click.option("--k", type=int, default=None, help="Dictionary size (default 50).")
@click.option("--extractor", type=str, default=None,
              help=f"Feature extractor (default moments; one of {sorted(EXTRACTORS)}).")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_obj
def cmd_fit_codebook(st: Settings, dataset_dir, k, extractor, seed, out_path):
    """Fit a word codebook on every frame of a dataset."""
    k = int(st.get("fit-codebook", "k", k, 50))
    extractor = str(st.get("fit-codebook", "extractor", extractor, "moments"))
    seed = st.seed("fit-codebook", seed)
    traces = ds.load_dataset(dataset_dir)
    descriptors = np.array([
        extract_features(f.pressures, extractor)
        for t in sorted(traces, key=lambda t: (t.object_id, t.trial_index))
        for f in t.frames
    ])
    codebook = fit_codebook(descriptors, k, seed, extractor_id=extractor)
    save_codebook(codebook, out_path)
    click.echo(f"fitted k={k} codebook ({extractor}, {len(descriptors)} descriptors, "
               f"seed={seed}) -> {out_path}")


@cli.command("build-library")
@click.option("--dataset", "dataset_dir", type=click.Path(), required=True)
@click.option("--codebook", "codebook_path", type=click.Path(), default=None,
              help="Existing codebook file; fitted from the dataset when omitted.")
@click.option("--k", type=int, default=None)
@click.option("--extractor", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def cmd_build_library(st: Settings, dataset_dir, codebook_path, k, extractor, seed, out_dir):
    """Build and save a reference model library from all trials of a dataset."""
    traces = ds.load_dataset(dataset_dir)
    extractor = str(st.get("build-library", "extractor", extractor, "moments"))
    if codebook_path:
        codebook = load_codebook(codebook_path)
        extractor = codebook.extractor_id
    else:
        k = int(st.get("build-library", "k", k, 50))
        seed = st.seed("build-library", seed)
        descriptors = np.array([
            extract_features(f.pressures, extractor)
            for t in sorted(traces, key=lambda t: (t.object_id, t.trial_index))
            for f in t.frames
        ])
        codebook = fit_codebook(descriptors, k, seed, extractor_id=extractor)
    grouped = {}
    for trace in traces:
        grouped.setdefault(trace.object_id, []).append(trace)
    models = []
    for oid in sorted(grouped):
        frames = [f for t in sorted(grouped[oid], key=lambda t: t.trial_index)
                  for f in t.frames]
        desc = np.array([extract_features(f.pressures, extractor) for f in frames])
        positions = np.array([f.position for f in frames])
        labels = assign_labels(codebook, desc)
        models.append(ObjectModel(
            object_id=oid,
            spatial_cloud=positions,
            labeled_cloud=np.hstack([positions, labels[:, None].astype(np.float64)]),
            histogram=histogram_from_labels(labels, codebook.k),
        ))
    save_library(ModelLibrary(models=models, codebook=codebook), out_dir)
    click.echo(f"wrote library with {len(models)} models -> {out_dir}")


@cli.command("classify")
@click.option("--library", "library_dir", type=click.Path(), required=True)
@click.option("--dataset", "dataset_dir", type=click.Path(), required=True)
@click.option("--object", "object_id", type=str, required=True)
@click.option("--trial", type=int, required=True)
@click.option("--touches", type=int, default=None, help="Use only the first t frames.")
@click.option("--methods", type=str, default=None,
              help='Method specs separated by ";" (e.g. '
                   '"ICP;weighted_sum:ICP=0.7,BoW=0.3").')
@click.option("--max-iterations", type=int, default=None)
@click.option("--error-tolerance", type=float, default=None)
@click.option("--relative-change-threshold", "relative_change", type=float, default=None)
@click.option("--label-scale", type=float, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Distances CSV (stdout when omitted).")
@click.pass_obj
def cmd_classify(st: Settings, library_dir, dataset_dir, object_id, trial, touches,
                 methods, max_iterations, error_tolerance, relative_change,
                 label_scale, out_path):
    """Classify one test trace against a model library."""
    methods = str(st.get("classify", "methods", methods, "ICP,BoW,iCLAP"))
    specs = parse_methods(methods)
    config = _reg_config(st, "classify", max_iterations, error_tolerance,
                         relative_change, label_scale)
    library = load_library(library_dir)
    traces = [t for t in ds.load_dataset(dataset_dir)
              if t.object_id == str(object_id) and t.trial_index == trial]
    if not traces:
        raise FormatError(f"no trace for object {object_id!r} trial {trial} in {dataset_dir}")
    trace = traces[0]
    frames = trace.frames[:touches] if touches else trace.frames
    positions = np.array([f.position for f in frames])
    desc = np.array([extract_features(f.pressures, library.codebook.extractor_id)
                     for f in frames])
    labels = assign_labels(library.codebook, desc)
    labeled = np.hstack([positions, labels[:, None].astype(np.float64)])

    base_needed = set()
    for s in specs:
        base_needed.update([s] if isinstance(s, str) else s.inputs)
    vectors = {}
    if METHOD_ICP in base_needed:
        vectors[METHOD_ICP] = classify_icp(positions, library, config)
    if METHOD_BOW in base_needed:
        vectors[METHOD_BOW] = classify_bow(
            histogram_from_labels(labels, library.codebook.k), library)
    if METHOD_ICLAP in base_needed:
        vectors[METHOD_ICLAP] = classify_iclap(labeled, library, config)

    lines = ["method,decision," + ",".join(library.object_ids)]
    for s in specs:
        vec = vectors[s] if isinstance(s, str) else fuse(s, vectors)
        lines.append(",".join([method_name(s), decide(vec)]
                              + [repr(float(v)) for v in vec.distances]))
    payload = "\n".join(lines) + "\n"
    if out_path:
        _atomic_write(out_path, payload)
        click.echo(f"wrote {out_path}")
    else:
        click.echo(payload, nl=False)


@cli.command("evaluate")
@click.option("--dataset", "dataset_dir", type=click.Path(), required=True)
@click.option("--methods", type=str, default=None,
              help='Method specs separated by ";" (e.g. '
                   '"ICP;weighted_sum:ICP=0.7,BoW=0.3").')
@click.option("--touches", type=str, default=None, help='e.g. "1:20" or "1,5,10,15,20".')
@click.option("--k", type=int, default=None)
@click.option("--extractor", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--max-iterations", type=int, default=None)
@click.option("--error-tolerance", type=float, default=None)
@click.option("--relative-change-threshold", "relative_change", type=float, default=None)
@click.option("--label-scale", type=float, default=None)
@click.option("--jobs", type=int, default=None, help="Parallel fold workers (default 1).")
@click.option("--plots/--no-plots", "render_plots", default=True,
              help="Also render a matplotlib accuracy figure.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def cmd_evaluate(st: Settings, dataset_dir, methods, touches, k, extractor, seed,
                 max_iterations, error_tolerance, relative_change, label_scale,
                 jobs, render_plots, out_dir):
    """Leave-one-out evaluation; writes accuracy and confusion CSVs (and a figure)."""
    methods = str(st.get("evaluate", "methods", methods, "ICP,BoW,iCLAP"))
    specs = parse_methods(methods)
    touches = parse_touches(st.get("evaluate", "touches", touches, "1:20"))
    k = int(st.get("evaluate", "k", k, 50))
    extractor = str(st.get("evaluate", "extractor", extractor, "moments"))
    seed = st.seed("evaluate", seed)
    jobs = int(st.get("evaluate", "jobs", jobs, 1))
    config = _reg_config(st, "evaluate", max_iterations, error_tolerance,
                         relative_change, label_scale)
    traces = ds.load_dataset(dataset_dir)
    reports = run_loo(traces, specs, touches, k=k, extractor_id=extractor,
                      config=config, seed=seed, jobs=jobs)

    names = [method_name(s) for s in specs]
    lines = ["touch_count," + ",".join(names)]
    for i, t in enumerate(touches):
        lines.append(",".join([str(t)] + [repr(float(reports[n].accuracies[i]))
                                          for n in names]))
    _atomic_write(os.path.join(out_dir, "accuracy.csv"), "\n".join(lines) + "\n")

    folds = sorted({fold for n in names for (fold, _) in reports[n].confusion})
    for fold in folds:
        rows = ["method,touch_count,true_id,predicted_id,count"]
        for n in names:
            for (f, t), cells in sorted(reports[n].confusion.items()):
                if f != fold:
                    continue
                for (true_id, pred_id), count in sorted(cells.items()):
                    rows.append(f"{n},{t},{true_id},{pred_id},{count}")
        _atomic_write(os.path.join(out_dir, f"confusion_fold{fold}.csv"),
                      "\n".join(rows) + "\n")

    if render_plots:
        from .plots import plot_accuracy_curves

        plot_accuracy_curves(reports, os.path.join(out_dir, "accuracy.png"))
    for n in names:
        acc = reports[n].accuracies[-1]
        click.echo(f"{n}: accuracy at {touches[-1]} touches = {acc:.4f}")
    click.echo(f"wrote results to {out_dir}")


@cli.command("sweep")
@click.option("--dataset", "dataset_dir", type=click.Path(), required=True)
@click.option("--inputs", type=str, default=None,
              help='Comma-separated fusion inputs, e.g. "ICP,BoW" or "ICP,BoW,iCLAP".')
@click.option("--step", type=float, default=None, help="Weight grid step (default 0.1).")
@click.option("--touches", type=str, default=None)
@click.option("--designated-touch", type=int, default=None,
              help="Touch count used to pick the best weights (default 15).")
@click.option("--k", type=int, default=None)
@click.option("--extractor", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--max-iterations", type=int, default=None)
@click.option("--error-tolerance", type=float, default=None)
@click.option("--relative-change-threshold", "relative_change", type=float, default=None)
@click.option("--label-scale", type=float, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--plots/--no-plots", "render_plots", default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def cmd_sweep(st: Settings, dataset_dir, inputs, step, touches, designated_touch,
              k, extractor, seed, max_iterations, error_tolerance, relative_change,
              label_scale, jobs, render_plots, out_dir):
    """Brute-force weighted-sum sweep; writes the full table and the best weights."""
    inputs = str(st.get("sweep", "inputs", inputs, "ICP,BoW"))
    input_names = tuple(m.strip() for m in inputs.split(",") if m.strip())
    step = float(st.get("sweep", "step", step, 0.1))
    touches = parse_touches(st.get("sweep", "touches", touches, "15"))
    designated_touch = st.get("sweep", "designated_touch", designated_touch, None)
    if designated_touch is not None:
        designated_touch = int(designated_touch)
    k = int(st.get("sweep", "k", k, 50))
    extractor = str(st.get("sweep", "extractor", extractor, "moments"))
    seed = st.seed("sweep", seed)
    jobs = int(st.get("sweep", "jobs", jobs, 1))
    config = _reg_config(st, "sweep", max_iterations, error_tolerance,
                         relative_change, label_scale)
    traces = ds.load_dataset(dataset_dir)
    sweep = weight_sweep(traces, input_names, grid_step=step, touch_counts=touches,
                         designated_touch=designated_touch, k=k, extractor_id=extractor,
                         config=config, seed=seed, jobs=jobs)

    header = [f"w_{m}" for m in sweep.inputs] + [f"accuracy_t{t}" for t in touches]
    lines = [",".join(header)]
    for weights, report in sweep.rows:
        lines.append(",".join([repr(float(w)) for w in weights]
                              + [repr(float(a)) for a in report.accuracies]))
    _atomic_write(os.path.join(out_dir, "sweep.csv"), "\n".join(lines) + "\n")
    if render_plots:
        from .plots import plot_sweep

        plot_sweep(sweep, os.path.join(out_dir, "sweep.png"))
    best = ",".join(f"{m}={w:g}" for m, w in zip(sweep.inputs, sweep.best_weights))
    click.echo(f"best weights at {sweep.designated_touch} touches: {best} "
               f"(accuracy {sweep.best_accuracy:.4f})")
    click.echo(f"wrote results to {out_dir}")


def main(argv=None):
    try:
        cli(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(1)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (FormatError, InsufficientData, EmptyCloud, DimensionError,
            ClassificationError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except NumericalFailure as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except IclapError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    sys.exit(0)


if __name__ == "__main__":
    main()
