"""
文件名: field_io.py
描述: 网格函数的文件读写（文本格式为规范格式，另有二进制变体）。
主要功能:
    - 文本格式: 首行 `dim m1 [m2] period`，随后为行主序数值。
    - 二进制格式: 16 字节头（b"JKOF" + uint32 dim/m1/m2），随后为 float64 周期与数值。
    - 原子写入（临时文件 + os.replace）。
依赖: numpy
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import input_error
from .grid import GridFunction, build_grid

PathLike = Union[str, Path]

BINARY_MAGIC = b"JKOF"

# ============================================
# region 原子写入
# ============================================


def atomic_write_bytes(path: PathLike, payload: bytes) -> None:
    """
    原子写入字节内容。

    参数:
        path: 目标路径。
        payload: 字节内容。
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=str(target.parent))
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def atomic_write_text(path: PathLike, text: str) -> None:
    """原子写入 UTF-8 文本。"""
    atomic_write_bytes(path, text.encode("utf-8"))


def format_float(value: float) -> str:
    """可往返的浮点格式。"""
    return format(float(value), ".17g")


# endregion
# ============================================

# ============================================
# region 文本格式
# ============================================


def format_field(field: GridFunction) -> str:
    """
    将网格函数序列化为文本格式。

    参数:
        field: 网格函数。
    返回:
        文本内容。
    """
    grid = field.grid
    header = " ".join([str(grid.dim)] + [str(m) for m in grid.resolution] + [format_float(grid.period)])
    rows = field.values.reshape(-1, grid.resolution[-1])
    body = "\n".join(" ".join(format_float(v) for v in row) for row in rows)
    return header + "\n" + body + "\n"


def write_field(path: PathLike, field: GridFunction) -> None:
    """
    写出文本格式网格函数。

    参数:
        path: 目标路径。
        field: 网格函数。
    """
    atomic_write_text(path, format_field(field))


def read_field(path: PathLike) -> GridFunction:
    """
    读取文本格式网格函数。

    参数:
        path: 文件路径。
    返回:
        GridFunction 实例。
    """
    source = Path(path)
    if not source.is_file():
        raise input_error("FIELD_FILE_NOT_FOUND", f"字段文件不存在: {source}", field=str(source))
    try:
        text = source.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise input_error("FIELD_FILE_INVALID", f"无法读取字段文件 {source}: {exc}", field=str(source)) from exc
    lines = text.strip().splitlines()
    if not lines:
        raise input_error("FIELD_FILE_INVALID", f"字段文件为空: {source}", field=str(source))
    try:
        header = lines[0].split()
        dim = int(header[0])
        if len(header) != dim + 2:
            raise ValueError(f"文件头应包含 {dim + 2} 项")
        resolution = [int(token) for token in header[1 : 1 + dim]]
        period = float(header[1 + dim])
        values = np.array([float(token) for line in lines[1:] for token in line.split()])
    except (ValueError, IndexError) as exc:
        raise input_error("FIELD_FILE_INVALID", f"字段文件解析失败 {source}: {exc}", field=str(source)) from exc
    grid = build_grid(dim, resolution, period)
    if values.size != grid.size:
        raise input_error(
            "FIELD_FILE_INVALID",
            f"字段文件 {source} 包含 {values.size} 个数值，期望 {grid.size}",
            field=str(source),
        )
    return GridFunction(grid, values)


# endregion
# ============================================

# ============================================
# region 二进制格式
# ============================================


def write_field_binary(path: PathLike, field: GridFunction) -> None:
    """
    写出二进制格式网格函数（小端）。

    参数:
        path: 目标路径。
        field: 网格函数。
    """
    grid = field.grid
    m2 = grid.resolution[1] if grid.dim == 2 else 0
    header = BINARY_MAGIC + struct.pack("<III", grid.dim, grid.resolution[0], m2)
    body = struct.pack("<d", grid.period) + field.values.astype("<f8").tobytes(order="C")
    atomic_write_bytes(path, header + body)


def read_field_binary(path: PathLike) -> GridFunction:
    """
    读取二进制格式网格函数。

    参数:
        path: 文件路径。
    返回:
        GridFunction 实例。
    """
    source = Path(path)
    if not source.is_file():
        raise input_error("FIELD_FILE_NOT_FOUND", f"字段文件不存在: {source}", field=str(source))
    payload = source.read_bytes()
    if len(payload) < 24 or payload[:4] != BINARY_MAGIC:
        raise input_error("FIELD_FILE_INVALID", f"二进制字段文件头无效: {source}", field=str(source))
    dim, m1, m2 = struct.unpack("<III", payload[4:16])
    (period,) = struct.unpack("<d", payload[16:24])
    resolution = [m1] if dim == 1 else [m1, m2]
    grid = build_grid(dim, resolution, period)
    values = np.frombuffer(payload[24:], dtype="<f8")
    if values.size != grid.size:
        raise input_error("FIELD_FILE_INVALID", f"二进制字段文件长度不符: {source}", field=str(source))
    return GridFunction(grid, values.astype(float))


def load_field_any(path: PathLike) -> GridFunction:
    """按文件头自动识别文本/二进制格式。"""
    source = Path(path)
    if source.is_file():
        with source.open("rb") as handle:
            if handle.read(4) == BINARY_MAGIC:
                return read_field_binary(source)
    return read_field(source)


# endregion
# ============================================
