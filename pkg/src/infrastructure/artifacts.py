"""Atomic artifact writers (temp file + rename) for CSV, JSON, PGM and SVG outputs."""

import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from PIL import Image

from src.infrastructure.logging_config import get_logger

logger = get_logger("infrastructure.artifacts")

FAILED_MARKER = "RUN_FAILED"
CSV_FLOAT_FORMAT = "%.17g"

plt.rcParams["svg.hashsalt"] = "neustrom"


def write_bytes_atomic(path: str | os.PathLike, payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_text_atomic(path: str | os.PathLike, text: str) -> Path:
    return write_bytes_atomic(path, text.encode("utf-8"))


def write_frame_csv(path: str | os.PathLike, frame: pd.DataFrame, index: bool = False) -> Path:
    text = frame.to_csv(index=index, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return write_text_atomic(path, text)


def write_matrix_csv(path: str | os.PathLike, matrix: np.ndarray) -> Path:
    """Headerless row-major numeric matrix."""
    frame = pd.DataFrame(np.atleast_2d(np.asarray(matrix, dtype=np.float64)))
    text = frame.to_csv(index=False, header=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return write_text_atomic(path, text)


def read_matrix_csv(path: str | os.PathLike) -> np.ndarray:
    return pd.read_csv(path, header=None, float_precision="round_trip").to_numpy(dtype=np.float64)


def write_json(path: str | os.PathLike, payload: dict[str, Any]) -> Path:
    return write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def to_grayscale(matrix: np.ndarray) -> np.ndarray:
    """Max-normalized 8-bit grayscale; negative values clip to black."""
    m = np.clip(np.nan_to_num(np.asarray(matrix, dtype=np.float64)), 0.0, None)
    peak = m.max() if m.size else 0.0
    if peak > 0:
        m = m / peak
    return np.rint(m * 255.0).astype(np.uint8)


def write_pgm(path: str | os.PathLike, matrix: np.ndarray) -> Path:
    buffer = io.BytesIO()
    Image.fromarray(to_grayscale(np.atleast_2d(matrix)), mode="L").save(buffer, format="PPM")
    return write_bytes_atomic(path, buffer.getvalue())


def write_svg_heatmap(path: str | os.PathLike, matrix: np.ndarray, title: str | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    try:
        ax.imshow(to_grayscale(np.atleast_2d(matrix)), cmap="gray", vmin=0, vmax=255, interpolation="nearest")
        ax.set_axis_off()
        if title:
            ax.set_title(title)
        buffer = io.BytesIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None}, bbox_inches="tight")
    finally:
        plt.close(fig)
    return write_bytes_atomic(path, buffer.getvalue())


def write_heatmaps(out_dir: str | os.PathLike, stem: str, matrix: np.ndarray) -> list[Path]:
    out_dir = Path(out_dir)
    return [write_pgm(out_dir / f"{stem}.pgm", matrix), write_svg_heatmap(out_dir / f"{stem}.svg", matrix, stem)]


def mark_failed(out_dir: str | os.PathLike, error: BaseException) -> Path:
    marker = Path(out_dir) / FAILED_MARKER
    logger.error("Run failed, marker written to %s", marker)
    return write_text_atomic(marker, f"{type(error).__name__}: {error}\n")
