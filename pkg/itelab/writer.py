"""Write reports to files."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from loguru import logger
from scipy import sparse
from tqdm import tqdm
from typing_extensions import NotRequired, TypedDict, Unpack

from .strings import report_written

if TYPE_CHECKING:
    from .mesh import Mesh


class WriterParams(TypedDict):
    """Writer parameters."""

    output_format: NotRequired[str]
    delimiter: NotRequired[str]


def _cell(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, (int, np.integer)):
        return int(value)
    return value


def _plain(value: Any) -> Any:
    """Turn numpy and complex values into JSON types."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


class Writer(object):
    """Write reports to files."""

    @staticmethod
    def write(
        rows: list[dict[str, Any]],
        out_file: str | Path,
        headers: list[str] | None = None,
        **kwargs: Unpack[WriterParams],
    ) -> Path:
        """Write report rows to the output file."""
        output_format = kwargs.get("output_format", "csv")
        if output_format == "csv":
            fields = headers or (list(rows[0]) if rows else [])
            return Writer._write_to_csv(rows, Path(out_file), fields, str(kwargs.get("delimiter", ",")))
        if output_format == "json":
            return Writer.write_json(rows, out_file)
        msg = f"Format {output_format} is not supported"
        raise NotImplementedError(msg)

    @staticmethod
    def _write_to_csv(rows: list[dict[str, Any]], out_file: Path, headers: list[str], delimiter: str) -> Path:
        """Header row, then one line per row with floats at full precision."""
        out_file.parent.mkdir(parents=True, exist_ok=True)
        with out_file.open(mode="w", encoding="utf-8", newline="") as output_file:
            csv_writer = csv.DictWriter(output_file, fieldnames=headers, delimiter=delimiter)
            csv_writer.writeheader()
            bar = tqdm(
                desc=out_file.name,
                total=len(rows),
                unit="rows",
                colour="green",
            )
            for row in rows:
                csv_writer.writerow({key: _cell(row.get(key, "")) for key in headers})
                bar.update(1)
            bar.close()
        logger.info(report_written.format(path=out_file))
        return out_file

    @staticmethod
    def write_json(document: Any, out_file: str | Path) -> Path:
        """Sorted keys, indent 2."""
        path = Path(out_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_plain(document), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        logger.info(report_written.format(path=path))
        return path

    @staticmethod
    def write_mesh(mesh: Mesh, out_file: str | Path) -> Path:
        """ASCII mesh format."""
        path = Path(out_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(mesh.to_text(), encoding="utf-8")
        logger.info(report_written.format(path=path))
        return path

    @staticmethod
    def write_matrix(matrix: sparse.spmatrix, out_file: str | Path) -> Path:
        """Coordinate format: a 'rows cols nnz' line, then one 'row col re im' line per entry."""
        path = Path(out_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        coo = sparse.coo_matrix(matrix)
        values = coo.data.astype(complex)
        with path.open(mode="w", encoding="utf-8") as handle:
            handle.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
            for i, j, v in zip(coo.row, coo.col, values):
                handle.write(f"{i} {j} {v.real:.17g} {v.imag:.17g}\n")
        logger.info(report_written.format(path=path))
        return path
