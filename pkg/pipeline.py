"""Pipeline stages: synth, augment, render, estimate, evaluate, report.

Every stage reads and writes files under a fixed layout:

    <output_dir>/scenes/                 FOA WAV + metadata CSV per scene
    <output_dir>/augmented/              identity + three ACS rotations per scene
    <output_dir>/rendered/<repr>/        FOA, binaural or stereo WAV
    <output_dir>/predictions/<repr>/     predicted metadata CSV + ACCDOA grid
    <output_dir>/reports/                scores, confusion and polyphony reports

Per-file work runs on a thread pool; results are always collected in input
order so reports do not depend on scheduling.
"""

import concurrent.futures
import contextlib
import dataclasses
import datetime
import functools
import inspect
import logging
import os
import reprlib
import shutil
import threading
import time
import uuid

import humanize
import numpy as np

import reports
from accdoa import decode_accdoa, encode_accdoa
from ambisonics import FoaBuffer, expand_acs
from analysis import azimuth_histogram, lateral_robustness, polyphony_breakdown, quadrant_confusion
from audio_io import read_metadata_csv, read_wav, resample, write_metadata_csv, write_wav
from config import check_channels
from doa import TdoaGeometry, doa_2ch_tdoa, doa_foa_intensity, estimates_to_events
from errors import ConfigError, UsageError
from features import (
    dump_tensor,
    frame_levels,
    gcc_phat,
    intensity_vectors,
    mel_power,
    mel_spectrogram,
    pool_frames,
    stack_chunks,
    stft_multichannel,
)
from labels import flatten_to_horizontal, n_label_frames
from renderers import render
from scene_synth import polyphony_suite, single_source_suite, synthesize_scene
from seld_metrics import compute_scores, match_annotations

thread_id_map = {}
thread_id_counter = 0
thread_id_lock = threading.Lock()


# make a small thread id for logging
def get_small_thread_id():
    global thread_id_counter
    thread_id = threading.get_ident()
    with thread_id_lock:
        if thread_id not in thread_id_map:
            thread_id_map[thread_id] = thread_id_counter
            thread_id_counter += 1
    return thread_id_map[thread_id]


# decorator for stages: logs entry with shortened arguments, exit with elapsed time
def log_function_call(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        bound_arguments = inspect.signature(func).bind(*args, **kwargs)
        bound_arguments.apply_defaults()
        shown = {k: reprlib.repr(v) for k, v in bound_arguments.arguments.items() if k != "outputs"}

        call_uuid = uuid.uuid4().hex[:8]
        small_thread_id = get_small_thread_id()
        logging.info(f"[{call_uuid}-{small_thread_id}] Entering stage '{func.__name__}' with arguments {shown}")

        result = func(*args, **kwargs)

        elapsed_time = time.perf_counter() - start_time
        logging.info(
            f"[{call_uuid}-{small_thread_id}] Exiting stage '{func.__name__}' after {elapsed_time:.3f} seconds"
        )
        return result

    return wrapper


class StagedOutputs:
    """Paths written by a command, removed again if the command fails."""

    def __init__(self):
        self.paths = []
        self.lock = threading.Lock()

    def add(self, path):
        with self.lock:
            self.paths.append(path)
        return path

    def remove_all(self):
        for path in reversed(self.paths):
            if os.path.isfile(path):
                os.remove(path)
        logging.info(f"removed {len(self.paths)} partial outputs")
        self.paths = []


@contextlib.contextmanager
def staged_outputs():
    outputs = StagedOutputs()
    try:
        yield outputs
    except BaseException:
        outputs.remove_all()
        raise


def _track(outputs, path):
    return outputs.add(path) if outputs is not None else path


def _map(fn, items, workers):
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))


def _stem(path):
    return os.path.splitext(os.path.basename(path))[0]


def layout(cfg):
    out = cfg.output_dir
    return {
        "scenes": os.path.join(out, "scenes"),
        "augmented": os.path.join(out, "augmented"),
        "rendered": os.path.join(out, "rendered"),
        "predictions": os.path.join(out, "predictions"),
        "reports": os.path.join(out, "reports"),
    }


def build_suite(cfg):
    s = cfg.synthesis
    if s.suite == "single":
        return single_source_suite(
            s.n_scenes, seed=cfg.seed, length_s=s.scene_length_s, source=s.source,
            elevation_deg=0.0 if cfg.horizontal_only else s.elevation_deg,
        )
    return polyphony_suite(
        s.total_s, s.profile, seed=cfg.seed, scene_length_s=s.polyphony_scene_length_s, segment_s=s.segment_s
    )


@log_function_call
def synth_stage(cfg, out_dir, outputs=None):
    """Synthesize the configured suite; returns (wav, csv) path pairs."""
    s = cfg.synthesis
    specs = [
        dataclasses.replace(spec, noise_floor_db=s.noise_floor_db, reverb_rt60_s=s.reverb_rt60_s)
        for spec in build_suite(cfg)
    ]

    def write_one(indexed):
        i, spec = indexed
        foa, annotations = synthesize_scene(spec)
        stem = os.path.join(out_dir, f"scene_{i:04d}")
        wav = _track(outputs, write_wav(stem + ".wav", foa.data, foa.sample_rate_hz))
        csv = _track(outputs, write_metadata_csv(stem + ".csv", annotations))
        return wav, csv

    pairs = _map(write_one, list(enumerate(specs)), cfg.workers)
    total = datetime.timedelta(seconds=sum(spec.length_s for spec in specs))
    logging.info(f"synthesized {len(pairs)} scenes, {humanize.naturaldelta(total)} of audio")
    return pairs


def _read_foa(path, cfg):
    wav = read_wav(path)
    check_channels("foa", wav.channels, f"{path}: ")
    data = resample(wav.data.astype(np.float64), wav.sample_rate_hz, cfg.features.sample_rate_hz)
    return FoaBuffer(data, cfg.features.sample_rate_hz)


@log_function_call
def augment_stage(pairs, cfg, out_dir, outputs=None):
    """Write the identity and three ACS rotations of every (wav, csv) pair."""
    if not pairs:
        raise UsageError("no scenes to augment")

    def augment_one(pair):
        wav_path, csv_path = pair
        wav = read_wav(wav_path)
        check_channels("foa", wav.channels, f"{wav_path}: ")
        labels = read_metadata_csv(csv_path)
        os.makedirs(out_dir, exist_ok=True)
        identity = os.path.join(out_dir, f"{_stem(wav_path)}_rot000")
        # the identity member is a byte copy of its input
        written = [
            (
                _track(outputs, shutil.copyfile(wav_path, identity + ".wav")),
                _track(outputs, shutil.copyfile(csv_path, identity + ".csv")),
            )
        ]
        rotations = expand_acs(FoaBuffer(wav.data, wav.sample_rate_hz), labels)[1:]
        # FLOAT holds the negation of PCM_16 -32768 exactly
        for degrees, (foa, rotated) in zip((90, 180, 270), rotations):
            stem = os.path.join(out_dir, f"{_stem(wav_path)}_rot{degrees:03d}")
            written.append(
                (
                    _track(outputs, write_wav(stem + ".wav", foa.data, foa.sample_rate_hz, "FLOAT")),
                    _track(outputs, write_metadata_csv(stem + ".csv", rotated)),
                )
            )
        return labels, written

    results = _map(augment_one, pairs, cfg.workers)
    before = functools.reduce(lambda a, b: a.merge(b), (azimuth_histogram(labels) for labels, _ in results))
    after = functools.reduce(
        lambda a, b: a.merge(b),
        (azimuth_histogram(read_metadata_csv(csv)) for _, written in results for _, csv in written),
    )
    logging.info(f"azimuth balance before ACS:\n{reports.histogram_table(before)}")
    logging.info(f"azimuth balance after ACS:\n{reports.histogram_table(after)}")
    return [pair for _, written in results for pair in written]


@log_function_call
def render_stage(wav_paths, representation, cfg, out_dir, outputs=None):
    binaural_cfg = cfg.renderer.binaural_config()

    def render_one(path):
        foa = _read_foa(path, cfg)
        rendered = render(foa, representation, binaural_cfg)
        target = os.path.join(out_dir, os.path.basename(path))
        return _track(outputs, write_wav(target, rendered.data, rendered.sample_rate_hz))

    return _map(render_one, wav_paths, cfg.workers)


def estimate_events(data, sample_rate_hz, representation, cfg, seed=0, dump_prefix=None):
    """Predicted annotations (class_hint, source 0) for one recording."""
    check_channels(representation, data.shape[0])
    stft_cfg = cfg.features.stft_config()
    data = resample(np.asarray(data, dtype=np.float64), sample_rate_hz, stft_cfg.sample_rate_hz)
    n_frames = n_label_frames(data.shape[1] / stft_cfg.sample_rate_hz)
    spec = stft_multichannel(data, stft_cfg)
    est = cfg.estimator

    if representation == "foa":
        iv = intensity_vectors(spec, stft_cfg)
        energy = pool_frames(mel_power(spec[0], stft_cfg))
        estimates = doa_foa_intensity(pool_frames(iv), energy)
        threshold = est.foa_threshold
        spatial = iv
    else:
        gcc = gcc_phat(spec[0], spec[1], stft_cfg.gcc_max_lag, stft_cfg.fft_size)
        levels = np.sqrt(pool_frames(frame_levels(spec[0], spec[1]) ** 2))
        geometry = TdoaGeometry(
            separation_m=est.stereo_separation_m,
            speed_of_sound_mps=cfg.renderer.speed_of_sound_mps,
            mode="binaural" if representation == "binaural" else "stereo",
            sample_rate_hz=stft_cfg.sample_rate_hz,
            head_radius_m=cfg.renderer.head_radius_m,
        )
        estimates = doa_2ch_tdoa(pool_frames(gcc)[:, :, 0], geometry, levels)
        threshold = est.gcc_threshold
        spatial = gcc

    if dump_prefix is not None:
        chunk_frames = cfg.features.chunk_frames
        dump_tensor(dump_prefix + "_mel.npy", stack_chunks(mel_spectrogram(spec, stft_cfg), chunk_frames))
        spatial_name = "_iv.npy" if representation == "foa" else "_gcc.npy"
        dump_tensor(dump_prefix + spatial_name, stack_chunks(spatial, chunk_frames))

    estimates = [e for e in estimates if e.frame_index < n_frames]
    events = estimates_to_events(estimates, est.class_hint, threshold, est.policy, seed)
    return events, n_frames


@log_function_call
def estimate_stage(wav_paths, representation, cfg, out_dir, outputs=None, dump_features=False):
    """Predictions CSV (and ACCDOA grid) per input WAV; returns the CSV paths."""

    def estimate_one(indexed):
        i, path = indexed
        wav = read_wav(path)
        check_channels(representation, wav.channels, f"{path}: ")
        stem = os.path.join(out_dir, _stem(path))
        if dump_features:
            os.makedirs(out_dir, exist_ok=True)
            for suffix in ("_mel.npy", "_iv.npy" if representation == "foa" else "_gcc.npy"):
                _track(outputs, stem + suffix)
        events, n_frames = estimate_events(
            wav.data, wav.sample_rate_hz, representation, cfg, seed=[cfg.seed, i],
            dump_prefix=stem if dump_features else None,
        )
        grid = encode_accdoa(events, n_frames, cfg.metrics.accdoa_tracks, cfg.horizontal_only)
        os.makedirs(out_dir, exist_ok=True)
        grid.save(_track(outputs, stem + "_accdoa.npy"))
        decoded = decode_accdoa(grid, cfg.metrics.accdoa_threshold, cfg.horizontal_only)
        return _track(outputs, write_metadata_csv(stem + ".csv", decoded))

    return _map(estimate_one, list(enumerate(wav_paths)), cfg.workers)


@dataclasses.dataclass
class Evaluation:
    scores: object
    quadrants: object
    polyphony: object
    lateral: object
    matches: list


def pair_files(pred_paths, ref_paths):
    """Pair predictions with references by file name."""
    refs = {os.path.basename(p): p for p in ref_paths}
    missing = [p for p in pred_paths if os.path.basename(p) not in refs]
    if missing:
        raise UsageError(f"no reference file for prediction {missing[0]}")
    return [(p, refs[os.path.basename(p)]) for p in pred_paths]


@log_function_call
def evaluate_stage(pairs, cfg):
    def match_one(pair):
        pred_path, ref_path = pair
        preds = read_metadata_csv(pred_path)
        refs = read_metadata_csv(ref_path)
        if cfg.horizontal_only:
            preds, refs = flatten_to_horizontal(preds), flatten_to_horizontal(refs)
        matches = match_annotations(preds, refs, scene_id=_stem(ref_path))
        return matches, polyphony_breakdown(matches, refs)

    results = _map(match_one, pairs, cfg.workers)
    if not results:
        raise UsageError("nothing to evaluate")
    matches = [m for scene_matches, _ in results for m in scene_matches]
    polyphony = functools.reduce(lambda a, b: a.merge(b), (p for _, p in results))
    scores = compute_scores(matches, cfg.metrics.tolerance_deg)
    return Evaluation(
        scores,
        quadrant_confusion(matches),
        polyphony,
        lateral_robustness(matches, tuple(cfg.metrics.lateral_band_deg)),
        matches,
    )


@log_function_call
def report_stage(evaluation, prefix, out_dir, outputs=None):
    """Write every report for one evaluation; returns the written paths."""
    base = os.path.join(out_dir, prefix)
    paths = [
        reports.write_key_values(base + "_scores.txt", reports.scores_payload(evaluation.scores)),
        reports.write_json(base + "_scores.json", reports.scores_payload(evaluation.scores)),
        reports.write_json(base + "_quadrants.json", reports.quadrant_payload(evaluation.quadrants)),
        reports.write_confusion_grid(base + "_confusion_grid.csv", evaluation.quadrants),
        reports.write_json(base + "_polyphony.json", reports.polyphony_payload(evaluation.polyphony)),
        reports.write_json(base + "_lateral.json", reports.lateral_payload(evaluation.lateral)),
    ]
    for path in paths:
        _track(outputs, path)
    logging.info(f"{prefix} quadrant confusion:\n{reports.quadrant_table(evaluation.quadrants)}")
    logging.info(f"{prefix} polyphony breakdown:\n{reports.polyphony_table(evaluation.polyphony)}")
    return paths


@log_function_call
def run_pipeline(cfg, outputs=None):
    """Full chain for every configured representation; returns [(repr, Evaluation)]."""
    if not cfg.representations:
        raise ConfigError("no representations to run")
    dirs = layout(cfg)
    pairs = synth_stage(cfg, dirs["scenes"], outputs)
    if cfg.acs_enabled:
        pairs = augment_stage(pairs, cfg, dirs["augmented"], outputs)
    wav_paths = [wav for wav, _ in pairs]
    ref_paths = [csv for _, csv in pairs]

    results = []
    for representation in cfg.representations:
        rendered = render_stage(wav_paths, representation, cfg, os.path.join(dirs["rendered"], representation), outputs)
        predicted = estimate_stage(
            rendered, representation, cfg, os.path.join(dirs["predictions"], representation), outputs
        )
        evaluation = evaluate_stage(pair_files(predicted, ref_paths), cfg)
        report_stage(evaluation, representation, dirs["reports"], outputs)
        results.append((representation, evaluation))

    rows = [(r, e.scores, e.quadrants) for r, e in results]
    table = reports.comparison_table(rows)
    comparison_txt = os.path.join(dirs["reports"], "comparison.txt")
    with open(_track(outputs, comparison_txt), "w") as f:
        f.write(table + "\n")
    reports.write_json(
        _track(outputs, os.path.join(dirs["reports"], "comparison.json")),
        {
            r: {**reports.scores_payload(e.scores), "front_back_confusion": e.quadrants.front_back_confusion}
            for r, e in results
        },
    )
    logging.info(f"comparison:\n{table}")
    return results
