"""File formats: binary templates, CSV tables, manifests, checkpoints.

All writers are deterministic (fixed column orders, ``repr`` floats
that round-trip exactly, ``\\n`` line endings, rows in input order) and
every reader parses strictly: wrong magic, truncated payloads, ragged
rows or non-finite numbers raise :class:`ParseError` carrying the file
and position.

Template container layout (little-endian):

    offset 0  magic     4 bytes  b"IRT1"
    offset 4  version   1 byte
    offset 5  height    uint16
    offset 7  width     uint16
    offset 9  bits      ceil(H*W/8) bytes, MSB-first row-major
    ...       mask      same size
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .evaluation import Manifest, ManifestEntry, RocCurve
from .fusion import NormalizationParams
from .mlp import LAYER_SIZES, MlpParams, TrainConfig
from .templates import IrisTemplate, PeriocularRecord

TEMPLATE_MAGIC = b"IRT1"
TEMPLATE_VERSION = 1
_HEADER = struct.Struct("<4sBHH")

CHECKPOINT_FORMAT = "irisfuse-fusion-checkpoint"
CHECKPOINT_VERSION = 1


class ParseError(ValueError):
    """Malformed input; the message names the source and offending position."""


# ---------------------------------------------------------------------------
# Binary template container


def template_to_bytes(template: IrisTemplate) -> bytes:
    header = _HEADER.pack(
        TEMPLATE_MAGIC, TEMPLATE_VERSION, template.height, template.width
    )
    return header + template.packed_bits.tobytes() + template.packed_mask.tobytes()


def template_from_bytes(data: bytes, source: str = "<bytes>") -> IrisTemplate:
    if len(data) < _HEADER.size:
        raise ParseError(
            f"{source}: truncated header, expected {_HEADER.size} bytes, got {len(data)}"
        )
    magic, version, height, width = _HEADER.unpack_from(data)
    if magic != TEMPLATE_MAGIC:
        raise ParseError(f"{source}: bad magic {magic!r} at offset 0")
    if version != TEMPLATE_VERSION:
        raise ParseError(f"{source}: unsupported version {version}")
    if height < 1 or width < 1:
        raise ParseError(f"{source}: invalid dimensions {height}x{width}")
    plane = (height * width + 7) // 8
    expected = _HEADER.size + 2 * plane
    if len(data) != expected:
        raise ParseError(
            f"{source}: expected {expected} bytes for {height}x{width}, got {len(data)}"
        )
    bits = np.frombuffer(data, dtype=np.uint8, count=plane, offset=_HEADER.size)
    mask = np.frombuffer(data, dtype=np.uint8, count=plane, offset=_HEADER.size + plane)
    try:
        return IrisTemplate(
            height=height, width=width, packed_bits=bits, packed_mask=mask
        )
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from exc


def write_template(path, template: IrisTemplate) -> None:
    Path(path).write_bytes(template_to_bytes(template))


def read_template(path) -> IrisTemplate:
    path = Path(path)
    return template_from_bytes(path.read_bytes(), source=str(path))


# ---------------------------------------------------------------------------
# Float formatting / parsing helpers


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _parse_float(text: str, source: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"{source}:{line}: column {column!r}: not a number: {text!r}"
        ) from None
    if not math.isfinite(value):
        raise ParseError(f"{source}:{line}: column {column!r}: non-finite value")
    return value


def _parse_optional_float(text: str, source: str, line: int, column: str):
    if text == "":
        return None
    return _parse_float(text, source, line, column)


def _open_reader(path):
    return open(path, "r", newline="", encoding="utf-8")


def _open_writer(path):
    return open(path, "w", newline="", encoding="utf-8")


# ---------------------------------------------------------------------------
# Periocular feature CSV: id, eye_area, brow_area, f0..f{D-1}


def write_feature_csv(path, records: Mapping[str, PeriocularRecord]) -> None:
    items = sorted(records.items())
    if not items:
        raise ValueError("refusing to write an empty feature table")
    dim = items[0][1].dim
    with _open_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "eye_area", "brow_area"] + [f"f{i}" for i in range(dim)])
        for ref, record in items:
            if record.dim != dim:
                raise ValueError(f"{ref}: feature dimension {record.dim} != {dim}")
            writer.writerow(
                [ref, _fmt(record.eye_area), _fmt(record.brow_area)]
                + [_fmt(v) for v in record.features]
            )


def read_feature_csv(path) -> dict[str, PeriocularRecord]:
    source = str(path)
    records: dict[str, PeriocularRecord] = {}
    with _open_reader(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["id", "eye_area", "brow_area"]:
            raise ParseError(f"{source}:1: bad feature-table header")
        dim = len(header) - 3
        if dim < 1 or header[3:] != [f"f{i}" for i in range(dim)]:
            raise ParseError(f"{source}:1: bad feature column names")
        for line, row in enumerate(reader, start=2):
            if len(row) != 3 + dim:
                raise ParseError(
                    f"{source}:{line}: expected {3 + dim} fields, got {len(row)}"
                )
            ref = row[0]
            if ref in records:
                raise ParseError(f"{source}:{line}: duplicate id {ref!r}")
            eye = _parse_float(row[1], source, line, "eye_area")
            brow = _parse_float(row[2], source, line, "brow_area")
            values = [
                _parse_float(v, source, line, f"f{i}")
                for i, v in enumerate(row[3:])
            ]
            try:
                records[ref] = PeriocularRecord(
                    features=np.array(values), eye_area=eye, brow_area=brow
                )
            except ValueError as exc:
                raise ParseError(f"{source}:{line}: {exc}") from exc
    if not records:
        raise ParseError(f"{source}: no data rows")
    return records


# ---------------------------------------------------------------------------
# Manifest: one JSON object per line

_MANIFEST_KEYS = {
    "subject_id",
    "eye_side",
    "sample_index",
    "template_ref",
    "periocular_ref",
}


def write_manifest(path, manifest: Manifest) -> None:
    with _open_writer(path) as fh:
        for e in manifest.entries:
            fh.write(
                json.dumps(
                    {
                        "subject_id": e.subject_id,
                        "eye_side": e.eye_side,
                        "sample_index": e.sample_index,
                        "template_ref": e.template_ref,
                        "periocular_ref": e.periocular_ref,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_manifest(path) -> Manifest:
    source = str(path)
    entries = []
    with _open_reader(path) as fh:
        for line, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{source}:{line}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or set(obj) != _MANIFEST_KEYS:
                raise ParseError(
                    f"{source}:{line}: expected keys {sorted(_MANIFEST_KEYS)}"
                )
            if not isinstance(obj["sample_index"], int):
                raise ParseError(f"{source}:{line}: sample_index must be an integer")
            try:
                entries.append(ManifestEntry(**obj))
            except ValueError as exc:
                raise ParseError(f"{source}:{line}: {exc}") from exc
    try:
        return Manifest(tuple(entries))
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from exc


# ---------------------------------------------------------------------------
# Match CSV: raw matcher outputs per compared template pair


@dataclass(frozen=True)
class MatchRow:
    """One template comparison; iris fields are None for unusable pairs."""

    a_id: str
    b_id: str
    side: str
    label: str  # "genuine" | "impostor"
    iris_valid: bool
    hamming: float | None
    ws: float | None
    best_shift: int | None
    joint_valid: int | None
    mask_rate_a: float
    mask_rate_b: float
    perioc_dist: float
    eye_sum: float
    eye_diff: float
    brow_sum: float
    brow_diff: float


_MATCH_COLUMNS = [f.name for f in fields(MatchRow)]


def write_match_csv(path, rows: Iterable[MatchRow]) -> None:
    with _open_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_MATCH_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.a_id,
                    row.b_id,
                    row.side,
                    row.label,
                    "1" if row.iris_valid else "0",
                    _fmt(row.hamming),
                    _fmt(row.ws),
                    "" if row.best_shift is None else str(row.best_shift),
                    "" if row.joint_valid is None else str(row.joint_valid),
                    _fmt(row.mask_rate_a),
                    _fmt(row.mask_rate_b),
                    _fmt(row.perioc_dist),
                    _fmt(row.eye_sum),
                    _fmt(row.eye_diff),
                    _fmt(row.brow_sum),
                    _fmt(row.brow_diff),
                ]
            )


def _parse_optional_int(text: str, source: str, line: int, column: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        raise ParseError(
            f"{source}:{line}: column {column!r}: not an integer: {text!r}"
        ) from None


def read_match_csv(path) -> list[MatchRow]:
    source = str(path)
    rows: list[MatchRow] = []
    with _open_reader(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _MATCH_COLUMNS:
            raise ParseError(f"{source}:1: bad match-table header")
        for line, row in enumerate(reader, start=2):
            if len(row) != len(_MATCH_COLUMNS):
                raise ParseError(
                    f"{source}:{line}: expected {len(_MATCH_COLUMNS)} fields, got {len(row)}"
                )
            if row[3] not in ("genuine", "impostor"):
                raise ParseError(f"{source}:{line}: bad label {row[3]!r}")
            if row[4] not in ("0", "1"):
                raise ParseError(f"{source}:{line}: bad iris_valid flag {row[4]!r}")
            iris_valid = row[4] == "1"
            rows.append(
                MatchRow(
                    a_id=row[0],
                    b_id=row[1],
                    side=row[2],
                    label=row[3],
                    iris_valid=iris_valid,
                    hamming=_parse_optional_float(row[5], source, line, "hamming"),
                    ws=_parse_optional_float(row[6], source, line, "ws"),
                    best_shift=_parse_optional_int(row[7], source, line, "best_shift"),
                    joint_valid=_parse_optional_int(row[8], source, line, "joint_valid"),
                    mask_rate_a=_parse_float(row[9], source, line, "mask_rate_a"),
                    mask_rate_b=_parse_float(row[10], source, line, "mask_rate_b"),
                    perioc_dist=_parse_float(row[11], source, line, "perioc_dist"),
                    eye_sum=_parse_float(row[12], source, line, "eye_sum"),
                    eye_diff=_parse_float(row[13], source, line, "eye_diff"),
                    brow_sum=_parse_float(row[14], source, line, "brow_sum"),
                    brow_diff=_parse_float(row[15], source, line, "brow_diff"),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Score CSV: pair ids, label, the eight cues, raw scores, fused scores


@dataclass(frozen=True)
class ScoreRow:
    """Fused scores for one comparison; cue/fused fields are None when the
    iris pair was unusable (flagged, never imputed)."""

    a_id: str
    b_id: str
    side: str
    label: str
    iris_score: float | None
    perioc_norm: float | None
    mask_rate_a: float
    mask_rate_b: float
    eye_sum: float
    eye_diff: float
    brow_sum: float
    brow_diff: float
    hamming: float | None
    ws: float | None
    static: float | None
    dynamic: float | None


_SCORE_COLUMNS = [f.name for f in fields(ScoreRow)]
_SCORE_OPTIONAL = {
    "iris_score",
    "perioc_norm",
    "hamming",
    "ws",
    "static",
    "dynamic",
}


def write_score_csv(path, rows: Iterable[ScoreRow]) -> None:
    with _open_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_SCORE_COLUMNS)
        for row in rows:
            record = []
            for name in _SCORE_COLUMNS:
                value = getattr(row, name)
                record.append(value if isinstance(value, str) else _fmt(value))
            writer.writerow(record)


def read_score_csv(path) -> list[ScoreRow]:
    source = str(path)
    rows: list[ScoreRow] = []
    with _open_reader(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _SCORE_COLUMNS:
            raise ParseError(f"{source}:1: bad score-table header")
        for line, row in enumerate(reader, start=2):
            if len(row) != len(_SCORE_COLUMNS):
                raise ParseError(
                    f"{source}:{line}: expected {len(_SCORE_COLUMNS)} fields, got {len(row)}"
                )
            values: dict[str, object] = {}
            for name, text in zip(_SCORE_COLUMNS, row):
                if name in ("a_id", "b_id", "side", "label"):
                    values[name] = text
                elif name in _SCORE_OPTIONAL:
                    values[name] = _parse_optional_float(text, source, line, name)
                else:
                    values[name] = _parse_float(text, source, line, name)
            if values["label"] not in ("genuine", "impostor"):
                raise ParseError(f"{source}:{line}: bad label {values['label']!r}")
            rows.append(ScoreRow(**values))
    return rows


# ---------------------------------------------------------------------------
# ROC CSV


def write_roc_csv(path, curve: RocCurve) -> None:
    with _open_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "far", "tar"])
        for threshold, far, tar in curve:
            writer.writerow([_fmt(threshold), _fmt(far), _fmt(tar)])


def read_roc_csv(path) -> RocCurve:
    source = str(path)
    thresholds, far, tar = [], [], []
    with _open_reader(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["threshold", "far", "tar"]:
            raise ParseError(f"{source}:1: bad ROC header")
        for line, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ParseError(f"{source}:{line}: expected 3 fields, got {len(row)}")
            thresholds.append(_parse_float(row[0], source, line, "threshold"))
            far.append(_parse_float(row[1], source, line, "far"))
            tar.append(_parse_float(row[2], source, line, "tar"))
    return RocCurve(
        thresholds=np.array(thresholds), far=np.array(far), tar=np.array(tar)
    )


# ---------------------------------------------------------------------------
# Fusion checkpoint: network parameters + normalization + provenance


def write_checkpoint(
    path,
    params: MlpParams,
    norm: NormalizationParams,
    train_config: TrainConfig | None = None,
) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(LAYER_SIZES),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "normalization": {
            "perioc_min": norm.perioc_min,
            "perioc_max": norm.perioc_max,
        },
        "train_config": None
        if train_config is None
        else {
            "learning_rate": train_config.learning_rate,
            "batch_size": train_config.batch_size,
            "epochs": train_config.epochs,
            "seed": train_config.seed,
            "genuine_impostor_ratio": list(train_config.genuine_impostor_ratio)
            if train_config.genuine_impostor_ratio
            else None,
            "optimizer": train_config.optimizer,
            "momentum": train_config.momentum,
        },
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_checkpoint(path) -> tuple[MlpParams, NormalizationParams, dict | None]:
    source = str(path)
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: invalid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"{source}: not a fusion checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"{source}: unsupported version {payload.get('version')!r}")
    if payload.get("layer_sizes") != list(LAYER_SIZES):
        raise ParseError(
            f"{source}: layer sizes {payload.get('layer_sizes')} != {list(LAYER_SIZES)}"
        )
    try:
        params = MlpParams(
            tuple(np.array(w, dtype=np.float64) for w in payload["weights"]),
            tuple(np.array(b, dtype=np.float64) for b in payload["biases"]),
        )
        norm_obj = payload["normalization"]
        norm = NormalizationParams(
            perioc_min=norm_obj["perioc_min"], perioc_max=norm_obj["perioc_max"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{source}: {exc}") from exc
    return params, norm, payload.get("train_config")
