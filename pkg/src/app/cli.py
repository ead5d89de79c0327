"""
LongiForest command-line interface.

Subcommands: train, predict, evaluate, vimp, gvimp, depth, tune, simulate.
Exit status is 0 on success, 2 for invalid inputs or configuration and 3
for runtime failures. Every command writes its audit trail and the
provenance of its outputs next to them.
"""

import functools
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

import click
import numpy as np
from loguru import logger
from pydantic import ValidationError

from .. import __version__
from ..forest.forest_engine import ForestEngine, leaf_curves, tree_table
from ..importance.importance_engine import ImportanceEngine, importance_report
from ..ingestion.processors import TableProcessor
from ..models.data import (
    ColumnKind,
    FixedColumnSpec,
    FixedSchema,
    MarkerSpec,
    OutcomeSpec,
    OutcomeType,
)
from ..models.forest import ForestArchive
from ..models.simulation import SimConfig
from ..models.tables import PredictorData, ValidatedDataset
from ..models.versioning import VersionedArtifactType
from ..simulation.generator import SimulationEngine
from ..utils.audit import AuditLogger
from ..utils.errors import (
    ComputationError,
    DataValidationError,
    InvalidConfig,
    MissingColumn,
    SchemaMismatch,
)
from ..utils.validation import DatasetValidator, build_predictors
from ..utils.version_registry import VersionRegistry
from . import writers
from .archive import check_training_data, load_archive, save_archive
from .config import DataSource, OutputSpec, RunConfig

EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def configure_logging(verbose: bool) -> None:
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO",
               format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}")


RUN_CONTEXT_KEY = "longiforest.run_context"


class RunContext:
    """Audit trail, provenance registry and output directory of one command"""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.audit_logger = AuditLogger()
        self.registry = VersionRegistry()
        self.processor = TableProcessor(self.audit_logger)
        self.started = time.time()
        click_ctx = click.get_current_context(silent=True)
        if click_ctx is not None:
            click_ctx.meta[RUN_CONTEXT_KEY] = self

    def write_table(self, frame, name: str, artifact_type: VersionedArtifactType,
                    archive_hash: Optional[str] = None, sep: str = ",") -> Path:
        path = writers.write_table(frame, self.output_dir / name, sep)
        self.registry.register(str(path), artifact_type, archive_hash)
        logger.info("Wrote {}", path)
        return path

    def write_text(self, text: str, name: str, artifact_type: VersionedArtifactType,
                   archive_hash: Optional[str] = None) -> Path:
        path = self.output_dir / name
        path.write_text(text, encoding="utf-8")
        self.registry.register(str(path), artifact_type, archive_hash)
        logger.info("Wrote {}", path)
        return path

    def fail(self, error: Exception) -> None:
        """Record the failure and flush what was produced so far"""
        self.audit_logger.log_processing_error(error, int((time.time() - self.started) * 1000))
        self.finish()

    def finish(self) -> None:
        (self.output_dir / "audit_trail.json").write_text(self.audit_logger.export_audit_trail("json"),
                                                          encoding="utf-8")
        (self.output_dir / "provenance.json").write_text(self.registry.export(), encoding="utf-8")
        stats = self.audit_logger.get_audit_statistics()
        logger.debug("Audit: {} records, {} warnings", stats["total_records"], stats["warning_count"])


def _flush_failure(error: Exception) -> None:
    click_ctx = click.get_current_context(silent=True)
    run_ctx = click_ctx.meta.get(RUN_CONTEXT_KEY) if click_ctx is not None else None
    if run_ctx is None:
        return
    try:
        run_ctx.fail(error)
    except OSError as exc:
        logger.error("Could not write the audit trail: {}", exc)


def handle_errors(command):
    """Map package errors to exit codes"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except DataValidationError as e:
            logger.error("{}: {}", type(e).__name__, e)
            _flush_failure(e)
            sys.exit(EXIT_VALIDATION)
        except ComputationError as e:
            logger.error("{}: {}", type(e).__name__, e)
            _flush_failure(e)
            sys.exit(EXIT_RUNTIME)
        except Exception as e:
            logger.exception("Unexpected failure: {}", e)
            _flush_failure(e)
            sys.exit(EXIT_RUNTIME)
    return wrapper


def hyperparam_options(command):
    """Flags overriding the hyperparams block of the configuration"""
    options = [
        click.option("--ntree", type=int, help="Number of trees"),
        click.option("--mtry", type=int, help="Candidate predictors per node"),
        click.option("--nodesize", type=int, help="Minimal number of subjects per leaf"),
        click.option("--minsplit", type=int, help="Minimal number of events to split (survival)"),
        click.option("--nsplit-option", "nsplit_option", type=click.Choice(["quantile", "sample"])),
        click.option("--seed", type=int, help="Forest seed"),
        click.option("--cause", type=int, help="Cause of interest"),
        click.option("--ibs-min", "ibs_min", type=float),
        click.option("--ibs-max", "ibs_max", type=float),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def common_options(command):
    options = [
        click.option("--config", "config_path", type=click.Path(), required=True, help="JSON run configuration"),
        click.option("--output-dir", "output_dir", type=click.Path(), help="Output directory"),
        click.option("--n-jobs", "n_jobs", type=int, help="Worker count, -1 for all cores"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def model_option(command):
    return click.option("--model", "model_path", type=click.Path(), help="Model archive (default: output dir)")(command)


def load_config(config_path: str, **overrides) -> RunConfig:
    config = RunConfig.from_file(config_path)
    return config.with_overrides(**overrides)


def load_dataset(ctx: RunContext, config: RunConfig, markers: List[MarkerSpec], schema: FixedSchema,
                 outcome_spec: Optional[OutcomeSpec], hyperparams) -> ValidatedDataset:
    """Ingest the training tables and validate them together"""
    if outcome_spec is None:
        raise InvalidConfig("an outcome block is required")
    config.require("outcome")
    data = config.data
    ctx.processor.sep = data.sep
    long = None
    if markers:
        config.require("longitudinal")
        long = ctx.processor.ingest_longitudinal(data.longitudinal, data.id_column, data.time_column,
                                                 [m.name for m in markers])
    fixed = None
    if schema.columns:
        config.require("fixed")
        fixed = ctx.processor.ingest_fixed(data.fixed, data.id_column, schema)
    outcome = ctx.processor.ingest_outcome(data.outcome, data.id_column, outcome_spec)
    dataset = DatasetValidator(ctx.audit_logger).validate_inputs(long, fixed, outcome, markers, schema, hyperparams)
    for warning in dataset.warnings:
        logger.warning(warning)
    return dataset


def load_model_and_data(ctx: RunContext, config: RunConfig, model_path: Optional[str]):
    """Load an archive and the training data it was grown on"""
    path = model_path or str(Path(config.output.directory) / config.output.model)
    forest, archive_hash = load_archive(path, ctx.audit_logger)
    outcome_spec = config.outcome
    if outcome_spec is not None:
        outcome_spec = outcome_spec.model_copy(update={"levels": forest.outcome.levels or outcome_spec.levels,
                                                       "cause": forest.outcome.cause})
    dataset = load_dataset(ctx, config, forest.marker_specs, forest.fixed_schema, outcome_spec,
                           forest.hyperparams)
    check_training_data(forest, dataset)
    return forest, archive_hash, dataset


def output_dir_of(config: RunConfig) -> Path:
    return Path(config.output.directory)


@click.group()
@click.option("--verbose", is_flag=True, help="Debug-level console output")
@click.version_option(__version__, prog_name="longiforest")
def cli(verbose):
    """Random forests with longitudinal predictors"""
    configure_logging(verbose)


@cli.command()
@common_options
@hyperparam_options
@click.option("--vsplit/--no-vsplit", default=None, help="Write the split summary of every tree")
@click.option("--oob/--no-oob", "with_oob", default=True, help="Compute the OOB error for the summary")
@handle_errors
def train(config_path, output_dir, n_jobs, vsplit, with_oob, **hyperparams):
    """Grow a forest and write the model archive and summary"""
    start_time = time.time()
    config = load_config(config_path, output_dir=output_dir, n_jobs=n_jobs, **hyperparams)
    ctx = RunContext(output_dir_of(config))
    dataset = load_dataset(ctx, config, config.markers, config.fixed_schema, config.outcome, config.hyperparams)
    logger.info("Growing {} trees on {} subjects (mtry={})", config.hyperparams.ntree, dataset.n_subjects,
                dataset.mtry)

    engine = ForestEngine(ctx.audit_logger, config.n_jobs)
    forest = engine.grow_forest(dataset)
    model_path = ctx.output_dir / config.output.model
    archive_hash = save_archive(forest, model_path, ctx.audit_logger)
    ctx.registry.register(str(model_path), VersionedArtifactType.MODEL_ARCHIVE, archive_hash,
                          metadata={"ntree": forest.ntree, "mtry": forest.mtry})
    logger.info("Wrote {} ({})", model_path, archive_hash[:12])

    oob = None
    if with_oob:
        oob = engine.compute_oob_error(forest, dataset, archive_hash=archive_hash)
        logger.info("OOB error: {:.4f}", oob.oob_error)

    write_vsplit = config.output.vsplit if vsplit is None else vsplit
    if write_vsplit:
        for b in range(forest.ntree):
            ctx.write_table(tree_table(forest, b), f"vsplit/tree_{b + 1}.csv",
                            VersionedArtifactType.MODEL_ARCHIVE, archive_hash)
            if forest.outcome.type == OutcomeType.SURVIVAL:
                ctx.write_table(leaf_curves(forest, b), f"vsplit/leaf_curves_{b + 1}.csv",
                                VersionedArtifactType.MODEL_ARCHIVE, archive_hash)

    summary = engine.summarize(forest, oob, elapsed_seconds=time.time() - start_time)
    ctx.write_text(summary, "summary.txt", VersionedArtifactType.OOB_REPORT, archive_hash)
    click.echo(summary)
    ctx.finish()


def read_new_predictors(ctx: RunContext, forest: ForestArchive, data: DataSource) -> PredictorData:
    """Predictor tables of new subjects, in the training schema"""
    ctx.processor.sep = data.sep
    long = fixed = None
    for path in (data.longitudinal, data.fixed):
        if path and not Path(path).exists():
            raise InvalidConfig(f"input file {path} does not exist")
    try:
        if forest.marker_specs:
            if not data.longitudinal:
                raise InvalidConfig("a longitudinal file is required by this model")
            long = ctx.processor.ingest_longitudinal(data.longitudinal, data.id_column, data.time_column,
                                                     [m.name for m in forest.marker_specs])
        if forest.fixed_schema.columns:
            if not data.fixed:
                raise InvalidConfig("a fixed predictor file is required by this model")
            fixed = ctx.processor.ingest_fixed(data.fixed, data.id_column, forest.fixed_schema)
    except MissingColumn as e:
        raise SchemaMismatch(str(e)) from e
    ids = list(fixed.subject_ids) if fixed is not None else []
    if long is not None:
        ids += [sid for sid in long.subject_ids if sid not in set(ids)]
    return build_predictors(ids, long, fixed, forest.marker_specs, forest.fixed_schema,
                            missing_marker_error=SchemaMismatch)


@cli.command()
@common_options
@model_option
@click.option("--longitudinal", type=click.Path(), help="Marker file of the new subjects")
@click.option("--fixed", type=click.Path(), help="Time-fixed predictor file of the new subjects")
@click.option("--outcome", type=click.Path(), help="Outcome file used by --at-risk")
@click.option("--t0", "landmark", type=float, help="Landmark time")
@click.option("--at-risk", is_flag=True, help="Drop subjects whose event time is at or before t0")
@click.option("--curves-for", "curves_for", help="Comma-separated subject ids to write CIF curves for")
@handle_errors
def predict(config_path, output_dir, n_jobs, model_path, longitudinal, fixed, outcome, landmark, at_risk,
            curves_for):
    """Predict the outcome of new subjects"""
    config = load_config(config_path, output_dir=output_dir, n_jobs=n_jobs, longitudinal=longitudinal,
                         fixed=fixed, outcome=outcome, landmark=landmark)
    ctx = RunContext(output_dir_of(config))
    path = model_path or str(ctx.output_dir / config.output.model)
    forest, archive_hash = load_archive(path, ctx.audit_logger)
    predictors = read_new_predictors(ctx, forest, config.data)

    if at_risk:
        if config.landmark is None or forest.outcome.type != OutcomeType.SURVIVAL:
            raise InvalidConfig("--at-risk needs a survival model and --t0")
        config.require("outcome")
        spec = (config.outcome or OutcomeSpec(type=OutcomeType.SURVIVAL)).model_copy(
            update={"type": OutcomeType.SURVIVAL})
        observed = ctx.processor.ingest_outcome(config.data.outcome, config.data.id_column, spec)
        event_time = dict(zip(observed.subject_ids, observed.time))
        keep = [i for i, sid in enumerate(predictors.subject_ids)
                if sid not in event_time or event_time[sid] > config.landmark]
        logger.info("At-risk filter keeps {} of {} subjects", len(keep), predictors.n_subjects)
        predictors = predictors.subset(np.array(keep, dtype=int))

    result = ForestEngine(ctx.audit_logger, config.n_jobs).predict_new(forest, predictors, config.landmark)
    ctx.write_table(writers.prediction_frame(result), "pred_indiv.csv", VersionedArtifactType.PREDICTION,
                    archive_hash)
    ctx.write_table(writers.leaf_frame(result), "pred_leaf.csv", VersionedArtifactType.PREDICTION, archive_hash)
    for subject_id in writers.parse_id_list(curves_for):
        if result.outcome_type != OutcomeType.SURVIVAL:
            raise InvalidConfig("--curves-for needs a survival model")
        if subject_id not in result.subject_ids:
            raise InvalidConfig(f"subject {subject_id} is not among the predicted subjects")
        ctx.write_table(writers.subject_curve(result, subject_id), f"curves/cif_{subject_id}.csv",
                        VersionedArtifactType.PREDICTION, archive_hash)
    ctx.finish()


@cli.command()
@common_options
@model_option
@click.option("--t0", "landmark", type=float, help="Landmark time of OOB predictions")
@click.option("--averaging", type=click.Choice(["oob", "all"]), help="Trees averaged for each subject")
@handle_errors
def evaluate(config_path, output_dir, n_jobs, model_path, landmark, averaging):
    """Out-of-bag error of a model on its training data"""
    start_time = time.time()
    config = load_config(config_path, output_dir=output_dir, n_jobs=n_jobs, landmark=landmark,
                         averaging=averaging)
    ctx = RunContext(output_dir_of(config))
    forest, archive_hash, dataset = load_model_and_data(ctx, config, model_path)
    engine = ForestEngine(ctx.audit_logger, config.n_jobs)
    oob = engine.compute_oob_error(forest, dataset, config.landmark, config.averaging, archive_hash)
    if oob.never_oob:
        logger.warning("{} subjects are never out-of-bag and are excluded", len(oob.never_oob))
    per_subject, summary = writers.oob_frames(oob)
    ctx.write_table(per_subject, "oob_error.csv", VersionedArtifactType.OOB_REPORT, archive_hash)
    ctx.write_table(summary, "oob_summary.csv", VersionedArtifactType.OOB_REPORT, archive_hash)
    report = engine.summarize(forest, oob, elapsed_seconds=time.time() - start_time)
    ctx.write_text(report, "summary.txt", VersionedArtifactType.OOB_REPORT, archive_hash)
    click.echo(f"OOB error: {oob.oob_error:.6f}")
    ctx.finish()


@cli.command()
@common_options
@model_option
@click.option("--seed", type=int, help="Permutation seed (default: forest seed)")
@click.option("--repeats", type=int, help="Permutations averaged per predictor")
@click.option("--trajectory-permutation/--observation-permutation", "trajectory_permutation", default=None,
              help="Shuffle whole marker trajectories instead of observations")
@click.option("--pct", is_flag=True, help="Report importance as a percentage of the OOB error")
@handle_errors
def vimp(config_path, output_dir, n_jobs, model_path, seed, repeats, trajectory_permutation, pct):
    """Permutation importance of every predictor"""
    config = load_config(config_path, output_dir=output_dir, n_jobs=n_jobs, vimp_repeats=repeats,
                         trajectory_permutation=trajectory_permutation)
    ctx = RunContext(output_dir_of(config))
    forest, archive_hash, dataset = load_model_and_data(ctx, config, model_path)
    engine = ImportanceEngine(ctx.audit_logger, config.n_jobs)
    result = engine.compute_vimp(forest, dataset, seed if seed is not None else forest.hyperparams.seed,
                                 config.vimp_repeats, config.trajectory_permutation, archive_hash)
    table = importance_report(result, as_percentage=pct)
    ctx.write_table(writers.importance_frame(table), "vimp.csv", VersionedArtifactType.VIMP_REPORT, archive_hash)
    ctx.finish()


@cli.command()
@common_options
@model_option
@click.option("--group", "group_specs", multiple=True, help="Group as NAME=pred1,pred2 (repeatable)")
@click.option("--seed", type=int, help="Permutation seed (default: forest seed)")
@click.option("--repeats", type=int, help="Permutations averaged per group")
@click.option("--pct", is_flag=True, help="Report importance as a percentage of the OOB error")
@handle_errors
def gvimp(config_path, output_dir, n_jobs, model_path, group_specs, seed, repeats, pct):
    """Permutation importance of predictor groups"""
    config = load_config(config_path, output_dir=output_dir, n_jobs=n_jobs, vimp_repeats=repeats)
    groups = writers.parse_groups(group_specs) if group_specs else config.groups
    if not groups:
        raise InvalidConfig("no groups defined")
    ctx = RunContext(output_dir_of(config))
    forest, archive_hash, dataset = load_model_and_data(ctx, config, model_path)
    engine = ImportanceEngine(ctx.audit_logger, config.n_jobs)
    result = engine.compute_gvimp(forest, dataset, groups,
                                  seed if seed is not None else forest.hyperparams.seed,
                                  config.vimp_repeats, config.trajectory_permutation, archive_hash)
    table = importance_report(result, as_percentage=pct)
    ctx.write_table(writers.importance_frame(table), "gvimp.csv", VersionedArtifactType.GVIMP_REPORT,
                    archive_hash)
    ctx.finish()


@cli.command()
@click.option("--config", "config_path", type=click.Path(), required=True, help="JSON run configuration")
@click.option("--output-dir", "output_dir", type=click.Path(), help="Output directory")
@model_option
@handle_errors
def depth(config_path, output_dir, model_path):
    """Minimal depth of predictors and random-effect features"""
    config = load_config(config_path, output_dir=output_dir)
    ctx = RunContext(output_dir_of(config))
    path = model_path or str(ctx.output_dir / config.output.model)
    forest, archive_hash = load_archive(path, ctx.audit_logger)
    result = ImportanceEngine(ctx.audit_logger).compute_min_depth(forest, archive_hash)
    for warning in result.warnings:
        logger.warning(warning)
    predictors = importance_report(result)
    features = importance_report(result, by_feature=True)
    kind = VersionedArtifactType.DEPTH_REPORT
    ctx.write_table(writers.importance_frame(predictors), "depth_predictors.csv", kind, archive_hash)
    ctx.write_table(writers.importance_frame(features), "depth_features.csv", kind, archive_hash)
    ctx.write_table(writers.depth_tree_frame(result), "depth_trees.csv", kind, archive_hash)
    ctx.write_table(writers.depth_tree_frame(result, by_feature=True), "depth_trees_features.csv", kind,
                    archive_hash)
    ctx.write_text(writers.depth_report(result, predictors, features), "depth_report.txt", kind, archive_hash)
    ctx.finish()


@cli.command()
@common_options
@hyperparam_options
@click.option("--grid", help="Comma-separated mtry values (default: 1..P+Q)")
@handle_errors
def tune(config_path, output_dir, n_jobs, grid, **hyperparams):
    """OOB error over a grid of mtry values"""
    config = load_config(config_path, output_dir=output_dir, n_jobs=n_jobs, **hyperparams)
    ctx = RunContext(output_dir_of(config))
    hp = config.hyperparams.model_copy(update={"mtry": None})
    dataset = load_dataset(ctx, config, config.markers, config.fixed_schema, config.outcome, hp)
    try:
        values = [int(v) for v in writers.parse_id_list(grid)] if grid else config.mtry_grid
    except ValueError as e:
        raise InvalidConfig(f"invalid mtry grid {grid!r}") from e
    result = ForestEngine(ctx.audit_logger, config.n_jobs).tune_mtry(dataset, values)
    ctx.write_table(writers.tuning_frame(result, dataset.content_hash()), "tuning.csv",
                    VersionedArtifactType.TUNING)
    click.echo(f"Best mtry: {result.best_mtry}")
    ctx.finish()


def simulation_run_config(config: SimConfig) -> RunConfig:
    """Ready-to-run training configuration of simulated files"""
    columns = [FixedColumnSpec(name=name) for name in config.continuous_names]
    columns += [FixedColumnSpec(name=name, kind=ColumnKind.CATEGORICAL, levels=["0", "1"])
                for name in config.binary_names]
    return RunConfig(
        data=DataSource(longitudinal="longitudinal.csv", fixed="fixed.csv", outcome="outcome.csv"),
        markers=[MarkerSpec(name=name) for name in config.marker_names],
        fixed_schema=FixedSchema(columns=columns),
        outcome=OutcomeSpec(type=OutcomeType.NUMERIC, column="y"),
        output=OutputSpec(directory="output"),
    )


@cli.command()
@click.option("--config", "config_path", type=click.Path(), help="JSON simulation configuration")
@click.option("--output-dir", "output_dir", type=click.Path(), required=True, help="Output directory")
@click.option("--n-subjects", "n_subjects", type=int)
@click.option("--n-markers", "n_markers", type=int)
@click.option("--n-visits", "n_visits", type=int)
@click.option("--jitter-sd", "jitter_sd", type=float)
@click.option("--seed", type=int)
@handle_errors
def simulate(config_path, output_dir, **overrides):
    """Write a synthetic dataset and its run configuration"""
    payload = {}
    if config_path:
        try:
            payload = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise InvalidConfig(f"cannot read simulation configuration {config_path}: {e}") from e
    payload.update({k: v for k, v in overrides.items() if v is not None})
    if "n_markers" in overrides and overrides["n_markers"] is not None:
        payload.pop("markers", None)
    try:
        sim_config = SimConfig.model_validate(payload)
    except ValidationError as e:
        raise InvalidConfig(f"invalid simulation configuration: {e}") from e

    ctx = RunContext(Path(output_dir))
    data = SimulationEngine(ctx.audit_logger).generate(sim_config)
    kind = VersionedArtifactType.SIMULATED_DATA
    ctx.write_table(data.longitudinal, "longitudinal.csv", kind)
    ctx.write_table(data.fixed, "fixed.csv", kind)
    ctx.write_table(data.outcome, "outcome.csv", kind)
    ctx.write_table(data.truths, "truths.csv", kind)
    ctx.write_text(simulation_run_config(sim_config).model_dump_json(indent=2), "run_config.json", kind)
    logger.info("Simulated {} subjects with {} markers", sim_config.n_subjects, sim_config.n_markers)
    ctx.finish()


if __name__ == "__main__":
    cli()
