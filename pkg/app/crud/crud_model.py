# app/crud/crud_model.py
# .c2m 모델 파일: magic "C2M\0" | u32-LE 헤더 길이 | UTF-8 JSON 헤더 | f64-LE 가중치 blob

import json
import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from app.core.exceptions import ModelFormatError, UnknownLayerKindError
from app.core.provenance import canonical_json, sha256_hex
from app.crud.crud_artifact import write_bytes_atomic
from app.models.network import TrainedModel
from app.schemas.model_spec import ModelSpec
from app.schemas.training import TrainingMeta

logger = logging.getLogger(__name__)

MAGIC = b"C2M\x00"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<I")


def encode_model(model: TrainedModel) -> bytes:
    names = list(model.spec.parameter_shapes())
    header = {
        "format_version": FORMAT_VERSION,
        "spec": model.spec.model_dump(mode="json"),
        "training_meta": model.training_meta.model_dump(mode="json") if model.training_meta else None,
        "manifest": [[name, list(model.weights[name].shape)] for name in names],
    }
    header_bytes = canonical_json(header).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(model.weights[name], dtype="<f8").tobytes() for name in names)
    return MAGIC + _LENGTH.pack(len(header_bytes)) + header_bytes + blob


def decode_model(data: bytes) -> TrainedModel:
    if len(data) < 8 or data[:4] != MAGIC:
        raise ModelFormatError("bad magic at offset 0 (not a .c2m model file)")
    (header_length,) = _LENGTH.unpack_from(data, 4)
    header_end = 8 + header_length
    if header_end > len(data):
        raise ModelFormatError(f"header at offset 8 claims {header_length} bytes, file has {len(data) - 8}")
    try:
        header = json.loads(data[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"unreadable header at offset 8: {e}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"field format_version: unsupported value {header.get('format_version')!r}")
    try:
        spec = ModelSpec.model_validate(header["spec"])
        meta = TrainingMeta.model_validate(header["training_meta"]) if header.get("training_meta") else None
        manifest = [(str(name), tuple(int(d) for d in shape)) for name, shape in header["manifest"]]
    except UnknownLayerKindError:
        raise
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise ModelFormatError(f"invalid header field: {e}") from None

    weights: dict[str, np.ndarray] = {}
    offset = header_end
    for name, shape in manifest:
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(data):
            raise ModelFormatError(f"weight blob truncated at offset {offset} (parameter {name})")
        weights[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset = end
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes at offset {offset}")
    try:
        return TrainedModel(spec, weights, meta)
    except ValueError as e:
        raise ModelFormatError(f"manifest does not match the model description: {e}") from None


def save_model(model: TrainedModel, path: str | Path) -> str:
    """모델을 원자적으로 저장하고 model_hash (파일 전체 sha256) 를 돌려줍니다."""
    data = encode_model(model)
    write_bytes_atomic(path, data)
    digest = sha256_hex(data)
    logger.info(f"✅ Model saved: {path} (hash={digest[:16]})")
    return digest


def load_model(path: str | Path) -> tuple[TrainedModel, str]:
    path = Path(path)
    if not path.is_file():
        raise ModelFormatError(f"model file not found: {path}")
    data = path.read_bytes()
    return decode_model(data), sha256_hex(data)
