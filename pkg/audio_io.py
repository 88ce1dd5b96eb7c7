"""WAV and DCASE metadata files.

WAV files are RIFF/WAVE with PCM_16 or FLOAT samples and at most four
channels. Metadata CSVs have no header and five integer columns:
frame, class, source, azimuth, elevation.
"""

import csv
import dataclasses
import logging
import math
import os

import numpy as np
import scipy.signal
import soundfile as sf

from errors import ConfigError, MetadataFormatError, WavFormatError
from labels import EventAnnotation, sort_annotations, wrap_azimuth

SUPPORTED_SUBTYPES = ("PCM_16", "FLOAT")
MAX_CHANNELS = 4
METADATA_COLUMNS = ("frame", "class", "source", "azimuth", "elevation")


@dataclasses.dataclass(frozen=True, eq=False)
class WavData:
    data: np.ndarray  # channels x samples, float32
    sample_rate_hz: int
    subtype: str = "FLOAT"

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]


def read_wav(path):
    try:
        info = sf.info(path)
    except RuntimeError as e:
        raise WavFormatError(f"{path}: not a readable WAV file ({e})")
    if info.format != "WAV":
        raise WavFormatError(f"{path}: container {info.format} is not RIFF/WAVE")
    if info.subtype not in SUPPORTED_SUBTYPES:
        raise WavFormatError(f"{path}: unsupported sample format {info.subtype}")
    if info.channels > MAX_CHANNELS:
        raise WavFormatError(f"{path}: {info.channels} channels, at most {MAX_CHANNELS} supported")
    # PCM_16 is scaled by 1/32768
    data, sample_rate = sf.read(path, dtype="float32", always_2d=True)
    logging.debug(f"read {path}: {info.channels} ch, {sample_rate} Hz, {info.subtype}, {data.shape[0]} samples")
    return WavData(np.ascontiguousarray(data.T), int(sample_rate), info.subtype)


def write_wav(path, data, sample_rate_hz, subtype="FLOAT"):
    data = np.atleast_2d(np.asarray(data))
    if subtype not in SUPPORTED_SUBTYPES:
        raise WavFormatError(f"unsupported sample format {subtype}")
    if not 1 <= data.shape[0] <= MAX_CHANNELS:
        raise WavFormatError(f"{data.shape[0]} channels, expected 1 to {MAX_CHANNELS}")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    try:
        sf.write(path, data.T, int(sample_rate_hz), subtype=subtype, format="WAV")
    except (RuntimeError, TypeError) as e:
        raise WavFormatError(f"{path}: could not write WAV ({e})")
    return path


def resample(data, from_rate_hz, to_rate_hz):
    """Polyphase resampling along the last axis with scipy's Kaiser-windowed sinc filter."""
    if from_rate_hz == to_rate_hz:
        return np.asarray(data)
    divisor = math.gcd(int(from_rate_hz), int(to_rate_hz))
    up, down = int(to_rate_hz) // divisor, int(from_rate_hz) // divisor
    return scipy.signal.resample_poly(data, up, down, axis=-1, window=("kaiser", 5.0))


def _parse_int(value, column, line_number):
    try:
        return int(value.strip())
    except ValueError:
        raise MetadataFormatError(f"{column} {value!r} is not an integer", line_number)


def read_metadata_csv(path):
    """Parse a DCASE metadata CSV into EventAnnotations, sorted by (frame, class, source)."""
    annotations = []
    seen = set()
    with open(path, "rb") as f:
        raw_lines = f.read().splitlines()
    lines = []
    for line_number, raw in enumerate(raw_lines, start=1):
        try:
            lines.append(raw.decode("utf-8"))
        except UnicodeDecodeError as e:
            raise MetadataFormatError(f"not UTF-8 text ({e.reason} at byte {e.start})", line_number)
    for line_number, row in enumerate(csv.reader(lines), start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(METADATA_COLUMNS):
            raise MetadataFormatError(f"expected {len(METADATA_COLUMNS)} columns, got {len(row)}", line_number)
        frame, class_index, source, azimuth, elevation = (
            _parse_int(value, column, line_number) for value, column in zip(row, METADATA_COLUMNS)
        )
        if not -180 <= azimuth < 180:
            raise MetadataFormatError(f"azimuth out of range: {azimuth}", line_number)
        if not -90 <= elevation <= 90:
            raise MetadataFormatError(f"elevation out of range: {elevation}", line_number)
        if (frame, class_index, source) in seen:
            raise MetadataFormatError(f"duplicate record for frame {frame} class {class_index} source {source}", line_number)
        seen.add((frame, class_index, source))
        try:
            annotations.append(EventAnnotation(frame, class_index, source, float(azimuth), float(elevation)))
        except ConfigError as e:
            raise MetadataFormatError(str(e), line_number)
    return sort_annotations(annotations)


def round_half_up(value):
    return int(math.floor(value + 0.5))


def write_metadata_csv(path, annotations):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for a in sort_annotations(annotations):
            writer.writerow(
                [
                    a.frame_index,
                    a.class_index,
                    a.source_index,
                    int(wrap_azimuth(round_half_up(a.azimuth_deg))),
                    round_half_up(a.elevation_deg),
                ]
            )
    return path
