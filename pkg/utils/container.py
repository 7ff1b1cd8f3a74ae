"""
utils/container.py
───────────────────
样本集合（SampleEnsemble）的二进制容器与 CSV 导出。

容器格式：
  ┌──────────────┬──────────────────────┬───────────────┬──────────────────────────┐
  │ magic 8 字节  │ 头长度 uint64 (LE)    │ JSON 头 (UTF-8) │ float64 小端，行主序 N×d  │
  └──────────────┴──────────────────────┴───────────────┴──────────────────────────┘

JSON 头：model 描述、N、shape、master_seed、stream、derivation、endianness。
"""

import csv
import json
import struct
from pathlib import Path

import numpy as np

from services.errors import ConfigError, ShapeError
from services.generators import SampleEnsemble, model_from_dict

MAGIC = b"CONCLAB1"
_LENGTH = struct.Struct("<Q")
# 超过这个单元格数就不导出 CSV
CSV_MAX_CELLS = 10_000_000


def save_ensemble(ensemble: SampleEnsemble, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ensemble.header()
    header["endianness"] = "little"
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_LENGTH.pack(len(header_bytes)))
        fh.write(header_bytes)
        fh.write(np.ascontiguousarray(ensemble.data, dtype="<f8").tobytes())
    return path


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ConfigError(f"{path}: not an ensemble container (bad magic)")
        (length,) = _LENGTH.unpack(fh.read(_LENGTH.size))
        return json.loads(fh.read(length).decode("utf-8"))


def load_ensemble(path) -> SampleEnsemble:
    path = Path(path)
    raw = path.read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ConfigError(f"{path}: not an ensemble container (bad magic)")
    (length,) = _LENGTH.unpack_from(raw, len(MAGIC))
    start = len(MAGIC) + _LENGTH.size
    header = json.loads(raw[start : start + length].decode("utf-8"))
    if header.get("endianness", "little") != "little":
        raise ConfigError(f"{path}: unsupported endianness {header['endianness']!r}")
    shape = tuple(header["shape"])
    width = int(np.prod(shape, dtype=int))
    data = np.frombuffer(raw, dtype="<f8", offset=start + length)
    if data.size != header["N"] * width:
        raise ShapeError(f"{path}: payload holds {data.size} values, header says {header['N']}×{width}")
    descriptor = header["model"]
    model = model_from_dict(descriptor)
    return SampleEnsemble(
        data.reshape(header["N"], width).astype(float),
        shape,
        model,
        header["master_seed"],
        header["stream"],
        header["derivation"],
        provenance=None if model is not None else descriptor,
        draw_key=header.get("draw_key"),
    )


def export_csv(ensemble: SampleEnsemble, path) -> Path:
    """每行一次试验，列名 x0, x1, ...（矩阵按行主序展开）"""
    if ensemble.N * ensemble.width > CSV_MAX_CELLS:
        raise ShapeError(
            f"{ensemble.N}×{ensemble.width} cells is too large for CSV; use the binary container"
        )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(ensemble.width)])
        for row in ensemble.data:
            writer.writerow([repr(float(v)) for v in row])
    return path
