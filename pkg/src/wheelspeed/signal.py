"""Uniform multi-channel time series, resampling, unit conversion and splitting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError, WheelSpeedError

#: Column order of the CSV interchange format.
CSV_COLUMNS = (
    "t",
    "omega_RL_SP",
    "omega_RR_SP",
    "omega_EM_SP",
    "M_drive",
    "M_brake",
    "omega_RL_ref",
    "omega_RR_ref",
    "maneuver_id",
)
DATA_CHANNELS = CSV_COLUMNS[1:-1]
#: Network input vector, in order.
INPUT_CHANNELS = ("omega_RL_SP", "omega_RR_SP", "omega_EM_SP", "M_drive", "M_brake")
#: Network target vector, in order.
TARGET_CHANNELS = ("omega_RL_ref", "omega_RR_ref")


@dataclass
class SignalFrame:
    """Uniformly sampled channels on an implicit clock ``t0 + k / sample_rate``.

    ``segments`` is a list of ``(maneuver_id, start, end)`` half-open index
    ranges that tile ``[0, len(frame))`` in order.
    """

    sample_rate: float
    channels: dict[str, np.ndarray]
    segments: list[tuple[str, int, int]] = field(default_factory=list)
    t0: float = 0.0

    def __post_init__(self):
        if not (self.sample_rate > 0):
            raise WheelSpeedError("invalid-rate", f"sample_rate={self.sample_rate}")
        self.channels = {k: np.asarray(v, dtype=float) for k, v in self.channels.items()}
        lengths = {v.shape for v in self.channels.values()}
        if len(lengths) > 1:
            raise WheelSpeedError("length-mismatch", f"channel shapes {sorted(lengths)}")
        n = len(self)
        if not self.segments:
            self.segments = [("all", 0, n)] if n else []
        self.segments = [(str(m), int(s), int(e)) for m, s, e in self.segments]
        pos = 0
        for m, s, e in self.segments:
            if s != pos or e <= s:
                raise WheelSpeedError("bad-segments", f"segment {m!r} [{s}, {e}) does not continue at {pos}")
            pos = e
        if pos != n:
            raise WheelSpeedError("bad-segments", f"segments cover {pos} of {n} samples")

    def __len__(self):
        if not self.channels:
            return 0
        return int(next(iter(self.channels.values())).shape[0])

    def __getitem__(self, name):
        return self.channels[name]

    @property
    def time(self):
        return self.t0 + np.arange(len(self)) / self.sample_rate

    @property
    def maneuver_ids(self):
        return [m for m, _, _ in self.segments]

    def groups(self):
        """Per-sample maneuver id array (the ``groups`` argument of the estimators)."""
        out = np.empty(len(self), dtype=object)
        for m, s, e in self.segments:
            out[s:e] = m
        return out

    def stack(self, names):
        """Columns ``names`` as an ``(n, len(names))`` array."""
        missing = [n for n in names if n not in self.channels]
        if missing:
            raise WheelSpeedError(f"missing-channel:{missing[0]}")
        return np.column_stack([self.channels[n] for n in names])

    def segment(self, maneuver_id):
        for m, s, e in self.segments:
            if m == maneuver_id:
                return SignalFrame(
                    self.sample_rate,
                    {k: v[s:e] for k, v in self.channels.items()},
                    [(m, 0, e - s)],
                    self.t0 + s / self.sample_rate,
                )
        raise KeyError(maneuver_id)

    def select(self, maneuver_ids):
        """Sub-frame holding only ``maneuver_ids``, in frame order."""
        wanted = set(maneuver_ids)
        parts = [self.segment(m) for m in self.maneuver_ids if m in wanted]
        if not parts:
            raise WheelSpeedError("empty-input", "no matching maneuvers")
        return concat_frames(parts)


def concat_frames(frames):
    """Concatenate frames with identical channel sets and rates."""
    frames = list(frames)
    if not frames:
        raise WheelSpeedError("empty-input")
    rate = frames[0].sample_rate
    names = list(frames[0].channels)
    segments, offset = [], 0
    for f in frames:
        if f.sample_rate != rate or list(f.channels) != names:
            raise WheelSpeedError("length-mismatch", "frames differ in rate or channels")
        segments.extend((m, s + offset, e + offset) for m, s, e in f.segments)
        offset += len(f)
    channels = {n: np.concatenate([f.channels[n] for f in frames]) for n in names}
    return SignalFrame(rate, channels, segments, frames[0].t0)


@dataclass(frozen=True)
class DatasetSplit:
    train: list[str]
    validation: list[str]
    test: list[str]

    def __post_init__(self):
        a, b, c = set(self.train), set(self.validation), set(self.test)
        if a & b or a & c or b & c:
            raise WheelSpeedError("split-leakage", "a maneuver is assigned to more than one split")

    def as_dict(self):
        return {"train": list(self.train), "validation": list(self.validation), "test": list(self.test)}


def zoh_resample(frame: SignalFrame, target_rate: float) -> SignalFrame:
    """Resample by holding the most recent input sample at or before each output time."""
    if len(frame) == 0:
        raise WheelSpeedError("empty-input")
    if not (target_rate > 0):
        raise WheelSpeedError("invalid-rate", f"target_rate={target_rate}")
    n = len(frame)
    ratio = frame.sample_rate / target_rate
    if ratio == 1.0:
        return SignalFrame(frame.sample_rate, {k: v.copy() for k, v in frame.channels.items()},
                           list(frame.segments), frame.t0)
    n_out = max(1, math.ceil(n / ratio - 1e-9))
    idx = np.floor(np.arange(n_out) * ratio + 1e-9).astype(np.int64)
    np.clip(idx, 0, n - 1, out=idx)
    channels = {k: v[idx] for k, v in frame.channels.items()}

    bounds = [int(round(s / ratio)) for _, s, _ in frame.segments] + [n_out]
    bounds[0] = 0
    segments = []
    for (m, _, _), s, e in zip(frame.segments, bounds[:-1], bounds[1:]):
        # a segment shorter than one output period collapses and is dropped
        if e > s:
            segments.append((m, s, e))
    return SignalFrame(float(target_rate), channels, segments, frame.t0)


def rot_to_translational(omega, radius, gear_ratio=1.0):
    """Rotational speed (rad/s) to tire-road speed (m/s).

    Wheel signals use ``gear_ratio=1``; motor signals pass the fixed drivetrain
    ratio so the result is ``omega / gear_ratio * radius``.
    """
    if not (radius > 0) or not (gear_ratio > 0):
        raise WheelSpeedError("invalid-geometry", f"radius={radius}, gear_ratio={gear_ratio}")
    return np.asarray(omega, dtype=float) / gear_ratio * radius


def split_by_maneuver(frame: SignalFrame, fractions=(0.7, 0.2, 0.1), seed=0) -> DatasetSplit:
    """Assign whole maneuvers to train/validation/test.

    Maneuvers are shuffled with ``seed``; each is then given to the split whose
    sample-count deficit against its target is largest (ties go to the earlier
    split).
    """
    fractions = np.asarray(fractions, dtype=float)
    if fractions.shape != (3,) or np.any(fractions < 0) or not np.isclose(fractions.sum(), 1.0):
        raise WheelSpeedError("invalid-fractions", f"{fractions.tolist()}")
    if len(frame.segments) < 3:
        raise WheelSpeedError("too-few-maneuvers", f"{len(frame.segments)} < 3")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(frame.segments))
    total = len(frame)
    target = fractions * total
    filled = np.zeros(3)
    buckets = ([], [], [])
    for i in order:
        m, s, e = frame.segments[i]
        k = int(np.argmax(target - filled))
        buckets[k].append(m)
        filled[k] += e - s
    rank = {m: i for i, m in enumerate(frame.maneuver_ids)}
    return DatasetSplit(*(sorted(b, key=rank.__getitem__) for b in buckets))


def split_frames(frame: SignalFrame, split: DatasetSplit):
    """``(train, validation, test)`` sub-frames; an empty split yields ``None``."""
    return tuple(frame.select(ids) if ids else None for ids in (split.train, split.validation, split.test))


# ---------------------------------------------------------------------------
# CSV interchange


def _format(x):
    return repr(float(x))


def frame_to_csv(frame: SignalFrame, path=None, header_comments=()):
    """Write the 9-column interchange CSV; returns the text when ``path`` is None."""
    missing = [c for c in DATA_CHANNELS if c not in frame.channels]
    if missing:
        raise WheelSpeedError(f"missing-channel:{missing[0]}")
    buf = io.StringIO()
    for line in header_comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    t = frame.time
    cols = [frame.channels[c] for c in DATA_CHANNELS]
    groups = frame.groups()
    for k in range(len(frame)):
        w.writerow([_format(t[k]), *(_format(c[k]) for c in cols), groups[k]])
    text = buf.getvalue()
    if path is None:
        return text
    Path(path).write_text(text, encoding="utf-8")
    return None


def read_frame_csv(path_or_text, sample_rate=None) -> SignalFrame:
    """Parse the interchange CSV. Lines starting with ``#`` are metadata.

    The sample rate is inferred from the time column unless given.
    """
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text(encoding="utf-8")
    else:
        text = path_or_text
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise SchemaError("empty-input", "no header row")
    rows = list(csv.reader(lines))
    header = [h.strip() for h in rows[0]]
    missing = [c for c in CSV_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"missing-column:{missing[0]}", f"header is {header}")
    col = {c: header.index(c) for c in CSV_COLUMNS}
    body = rows[1:]
    if not body:
        raise SchemaError("empty-input", "no data rows")
    try:
        data = {c: np.array([float(r[col[c]]) for r in body]) for c in CSV_COLUMNS[:-1]}
    except (ValueError, IndexError) as exc:
        raise SchemaError("bad-value", str(exc)) from None
    ids = np.array([r[col["maneuver_id"]] for r in body], dtype=object)
    t = data.pop("t")
    if sample_rate is None:
        if len(t) < 2:
            raise SchemaError("bad-value", "cannot infer sample rate from one row")
        sample_rate = 1.0 / float(np.median(np.diff(t)))
        sample_rate = float(round(sample_rate, 6))
    from .validation import check_groups

    segments = check_groups(ids, len(ids))
    return SignalFrame(sample_rate, data, segments, float(t[0]))
