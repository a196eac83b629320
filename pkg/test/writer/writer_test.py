"""Report writer test cases."""
from __future__ import annotations

import csv
import inspect
import json
from typing import TYPE_CHECKING

import numpy as np
import pytest
from scipy import sparse

from itelab.writer import Writer

if TYPE_CHECKING:
    from pathlib import Path

    from typing_extensions import Self

    from itelab.mesh import Mesh


class TestWriter:
    """Report writer test cases."""

    rows = [
        {"lambda": 0.1, "ratio": 1.0 / 3.0, "clamped": False},
        {"lambda": 1e4, "ratio": 2.5e-300, "clamped": True},
    ]

    def test_write_to_csv(self: Self, tmp_path: Path) -> None:
        """Floats keep full precision and flags are written as integers."""
        out_file = tmp_path / f"{inspect.stack()[0].function}.csv"
        Writer.write(self.rows, out_file, ["lambda", "ratio", "clamped"])
        with out_file.open() as file:
            reader = csv.reader(file)
            assert next(reader) == ["lambda", "ratio", "clamped"]
            body = list(reader)
        assert len(body) == len(self.rows)
        assert float(body[0][1]) == 1.0 / 3.0
        assert body[1][2] == "1"

    def test_headers_default_to_first_row(self: Self, tmp_path: Path) -> None:
        """Without headers the first row's keys are used, with the chosen delimiter."""
        out_file = tmp_path / f"{inspect.stack()[0].function}.csv"
        Writer.write(self.rows, out_file, delimiter=";")
        assert out_file.read_text().splitlines()[0] == "lambda;ratio;clamped"

    def test_write_json(self: Self, tmp_path: Path) -> None:
        """Complex numbers split into parts and non-finite values become null."""
        out_file = tmp_path / f"{inspect.stack()[0].function}.json"
        Writer.write_json({"b": np.float64(np.inf), "a": 1 + 2j, "c": np.arange(2)}, out_file)
        document = json.loads(out_file.read_text())
        assert document == {"a": {"re": 1.0, "im": 2.0}, "b": None, "c": [0, 1]}
        assert out_file.read_text().index('"a"') < out_file.read_text().index('"b"')

    def test_write_rows_as_json(self: Self, tmp_path: Path) -> None:
        """The json output format writes the row list."""
        out_file = tmp_path / f"{inspect.stack()[0].function}.json"
        Writer.write(self.rows, out_file, output_format="json")
        assert json.loads(out_file.read_text())[1]["clamped"] is True

    def test_unknown_format(self: Self, tmp_path: Path) -> None:
        """Only csv and json are supported."""
        with pytest.raises(NotImplementedError):
            Writer.write(self.rows, tmp_path / "out.xml", output_format="xml")

    def test_write_matrix(self: Self, tmp_path: Path) -> None:
        """Coordinate format with a size header."""
        out_file = tmp_path / f"{inspect.stack()[0].function}.coo"
        Writer.write_matrix(sparse.csr_matrix(np.array([[1.0, 0.0], [0.0, 2j]])), out_file)
        lines = out_file.read_text().splitlines()
        assert lines[0] == "2 2 2"
        assert lines[2].split() == ["1", "1", "0", "2"]

    def test_write_mesh(self: Self, tmp_path: Path, square_mesh: Mesh) -> None:
        """The mesh is written in its ASCII rendering."""
        out_file = Writer.write_mesh(square_mesh, tmp_path / "mesh.txt")
        assert out_file.read_text() == square_mesh.to_text()
