"""seldscope command line.

    seldscope [--verbose] <command> [options]

Commands: synth, augment, render, estimate, evaluate, report, pipeline,
compose, dump-config. Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import contextlib
import glob
import logging
import os
import sys

import argh

# sentry.io integration
import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

import pipeline
import reports
from config import REPRESENTATIONS, dump_config as render_config, load_config, with_overrides
from errors import EXIT_DATA, EXIT_USAGE, SeldError, UsageError
from seld_metrics import compose_reference_rows


class SeldParser(argh.ArghParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def setup_logging(verbose=False):
    level = logging.DEBUG if verbose else os.getenv("SELDSCOPE_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=level,
        datefmt="%Y-%m-%d/%H:%M:%S",
        format="%(asctime)s %(message)s",
    )
    # librosa pulls in numba, which logs every compilation at DEBUG
    logging.getLogger("numba").setLevel(logging.WARNING)


def setup_sentry():
    # Only initialize Sentry if the DSN is present
    if os.getenv("SELDSCOPE_SENTRY_DSN"):
        sentry_logging = LoggingIntegration(
            level=logging.INFO,  # Capture info and above as breadcrumbs
            event_level=logging.ERROR,  # Send errors as events
        )
        sentry_sdk.init(
            dsn=os.getenv("SELDSCOPE_SENTRY_DSN"),
            integrations=[sentry_logging],
            environment=os.getenv("SELDSCOPE_SENTRY_ENVIRONMENT", "development"),
        )


@contextlib.contextmanager
def stage(name):
    """Tag errors with the failing command and remove its partial outputs."""
    try:
        with pipeline.staged_outputs() as outputs:
            yield outputs
    except Exception as e:
        e.stage = name
        raise


def _config(config, **overrides):
    return with_overrides(load_config(config), overrides)


def _collect(path, extension):
    if os.path.isdir(path):
        found = sorted(glob.glob(os.path.join(path, f"*{extension}")))
    elif os.path.isfile(path):
        found = [path]
    else:
        raise UsageError(f"{path} does not exist")
    if not found:
        raise UsageError(f"no {extension} files in {path}")
    return found


def _scene_pairs(scenes_dir):
    pairs = []
    for wav in _collect(scenes_dir, ".wav"):
        csv = os.path.splitext(wav)[0] + ".csv"
        if not os.path.isfile(csv):
            raise UsageError(f"{wav} has no metadata file {csv}")
        pairs.append((wav, csv))
    return pairs


@argh.arg("--seed", type=int)
@argh.arg("--n-scenes", type=int)
@argh.arg("--workers", type=int)
@argh.arg("--suite", choices=("single", "polyphony"))
def synth(config=None, output_dir=None, seed=None, n_scenes=None, suite=None, workers=None):
    """Synthesize a scene suite to WAV + metadata CSV."""
    cfg = _config(
        config, output_dir=output_dir, seed=seed, workers=workers,
        **{"synthesis.n_scenes": n_scenes, "synthesis.suite": suite},
    )
    with stage("synth") as outputs:
        pairs = pipeline.synth_stage(cfg, pipeline.layout(cfg)["scenes"], outputs)
    return f"wrote {len(pairs)} scenes to {pipeline.layout(cfg)['scenes']}"


@argh.arg("--workers", type=int)
def augment(scenes, config=None, output_dir=None, workers=None):
    """Expand FOA scenes (WAV + CSV) with the three ACS rotations."""
    cfg = _config(config, output_dir=output_dir, workers=workers)
    with stage("augment") as outputs:
        pairs = pipeline.augment_stage(_scene_pairs(scenes), cfg, pipeline.layout(cfg)["augmented"], outputs)
    return f"wrote {len(pairs)} scenes to {pipeline.layout(cfg)['augmented']}"


@argh.arg("representation", nargs="?", choices=REPRESENTATIONS, help="defaults to the configured representation")
@argh.arg("--decoder", choices=("parametric", "ring"))
@argh.arg("--workers", type=int)
def render(inputs, representation, config=None, output_dir=None, decoder=None, workers=None):
    """Render FOA WAV files to another representation."""
    cfg = _config(config, output_dir=output_dir, workers=workers, **{"renderer.decoder": decoder})
    representation = representation or cfg.representation
    out_dir = os.path.join(pipeline.layout(cfg)["rendered"], representation)
    with stage("render") as outputs:
        paths = pipeline.render_stage(_collect(inputs, ".wav"), representation, cfg, out_dir, outputs)
    return f"wrote {len(paths)} files to {out_dir}"


@argh.arg("representation", nargs="?", choices=REPRESENTATIONS, help="defaults to the configured representation")
@argh.arg("--policy", choices=("front", "alternate", "random"))
@argh.arg("--workers", type=int)
def estimate(inputs, representation, config=None, output_dir=None, policy=None, dump_features=False, workers=None):
    """Estimate per-frame directions and write prediction CSVs."""
    cfg = _config(config, output_dir=output_dir, workers=workers, **{"estimator.policy": policy})
    representation = representation or cfg.representation
    out_dir = os.path.join(pipeline.layout(cfg)["predictions"], representation)
    with stage("estimate") as outputs:
        paths = pipeline.estimate_stage(
            _collect(inputs, ".wav"), representation, cfg, out_dir, outputs, dump_features=dump_features
        )
    return f"wrote {len(paths)} prediction files to {out_dir}"


def _evaluate(pred, ref, cfg):
    pred_paths = _collect(pred, ".csv")
    ref_paths = _collect(ref, ".csv")
    if len(pred_paths) == 1 and len(ref_paths) == 1:
        pairs = [(pred_paths[0], ref_paths[0])]
    else:
        pairs = pipeline.pair_files(pred_paths, ref_paths)
    return pipeline.evaluate_stage(pairs, cfg)


@argh.arg("--pred", required=True, help="prediction CSV or directory")
@argh.arg("--ref", required=True, help="reference CSV or directory")
@argh.arg("--tolerance", type=float)
def evaluate(pred=None, ref=None, config=None, tolerance=None, output_dir=None):
    """Score predictions against references; prints key = value lines."""
    cfg = _config(config, **{"metrics.tolerance_deg": tolerance})
    with stage("evaluate") as outputs:
        evaluation = _evaluate(pred, ref, cfg)
        payload = reports.scores_payload(evaluation.scores)
        if output_dir is not None:
            base = os.path.join(output_dir, "reports", "evaluate")
            outputs.add(reports.write_key_values(base + "_scores.txt", payload))
            outputs.add(reports.write_json(base + "_scores.json", payload))
    return "\n".join(f"{k} = {reports.fmt(payload[k], 6)}" for k in sorted(payload))


@argh.arg("--pred", required=True, help="prediction CSV or directory")
@argh.arg("--ref", required=True, help="reference CSV or directory")
def report(pred=None, ref=None, config=None, output_dir=None, prefix="report"):
    """Quadrant confusion, polyphony and lateral-robustness reports."""
    cfg = _config(config, output_dir=output_dir)
    with stage("report") as outputs:
        evaluation = _evaluate(pred, ref, cfg)
        pipeline.report_stage(evaluation, prefix, pipeline.layout(cfg)["reports"], outputs)
    return "\n\n".join(
        [reports.quadrant_table(evaluation.quadrants), reports.polyphony_table(evaluation.polyphony)]
    )


@argh.named("pipeline")
@argh.arg("--seed", type=int)
@argh.arg("--n-scenes", type=int)
@argh.arg("--workers", type=int)
@argh.arg("--suite", choices=("single", "polyphony"))
def pipeline_(config=None, output_dir=None, seed=None, n_scenes=None, suite=None, workers=None):
    """Synthesize, augment, render, estimate and evaluate every representation."""
    cfg = _config(
        config, output_dir=output_dir, seed=seed, workers=workers,
        **{"synthesis.n_scenes": n_scenes, "synthesis.suite": suite},
    )
    with stage("pipeline") as outputs:
        results = pipeline.run_pipeline(cfg, outputs)
    return reports.comparison_table([(r, e.scores, e.quadrants) for r, e in results])


def compose():
    """Recompute the SELD score of the published result rows from their components."""
    return reports.reference_rows_table(compose_reference_rows())


@argh.named("dump-config")
def dump_config(config=None):
    """Print the effective configuration (the defaults unless --config is given) as YAML."""
    return render_config(load_config(config)).rstrip("\n")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--verbose", action="store_true")
    known, _ = pre.parse_known_args(argv)
    setup_logging(known.verbose)
    setup_sentry()

    parser = SeldParser(prog="seldscope", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    parser.add_commands([synth, augment, render, estimate, evaluate, report, pipeline_, compose, dump_config])
    try:
        parser.dispatch(argv=argv, output_file=sys.stdout)
    except Exception as e:
        logging.error(f"error stage={getattr(e, 'stage', 'cli')} kind={type(e).__name__} message={e}")
        # I/O and library failures count as data errors
        sys.exit(e.exit_code if isinstance(e, SeldError) else EXIT_DATA)


if __name__ == "__main__":
    main()
