"""
File handler module for configuration, tabulated input and result output.

This module provides the FileHandler class which reads key = value config
files and two-column CSV inputs, and renders results as deterministic CSV
or JSON text.
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from structured_dephasing.utils.numerics import round_significant

REFERENCE_DIR = Path(__file__).parent / "reference"
TABLE_HEADER = ("dv_mm", "nd")
SPECTRUM_HEADER = ("q_mm_inv", "counts")


def format_number(value: Any) -> str:
    """Render a number with 12 significant digits; None becomes an empty field."""
    if value is None:
        return ""
    if isinstance(value, (int, float)):
        return format(float(value), ".12g")
    return str(value)


class FileHandler:
    """
    Handles file I/O for the simulator.

    Attributes:
        reference_dir (Path): Directory holding the bundled reference files

    Example:
        >>> handler = FileHandler()
        >>> rows = handler.load_table(handler.reference_path("table1_theory.csv"))
        >>> rows[0]
        (0.68, 0.49)
    """

    def __init__(self, reference_dir: Path = REFERENCE_DIR) -> None:
        self.reference_dir = reference_dir

    def reference_path(self, name: str) -> Path:
        """Path of a bundled reference file."""
        return self.reference_dir / name

    def load_config(self, path: Path) -> Dict[str, str]:
        """
        Read a ``key = value`` configuration file.

        Blank lines and text after ``#`` are ignored.

        Args:
            path: Configuration file.

        Returns:
            Mapping of keys to raw string values.

        Raises:
            FileNotFoundError: If the file does not exist.
            ValueError: On a line without ``=`` or with an empty key.
        """
        values: Dict[str, str] = {}
        text = Path(path).read_text(encoding="utf-8")
        for number, line in enumerate(text.splitlines(), start=1):
            content = line.split("#", 1)[0].strip()
            if not content:
                continue
            key, sep, value = content.partition("=")
            if not sep or not key.strip():
                raise ValueError(f"Malformed config line {number} in {path}: {line!r}")
            values[key.strip()] = value.strip()
        return values

    def load_table(self, path: Path) -> List[Tuple[float, float]]:
        """
        Read an N_D table with header ``dv_mm,nd``.

        Raises:
            FileNotFoundError: If the file does not exist.
            ValueError: On a wrong header, malformed rows or an empty table.
        """
        rows = self._read_pairs(Path(path), TABLE_HEADER)
        if not rows:
            raise ValueError(f"N_D table {path} has no data rows")
        return rows

    def load_spectrum_rows(self, path: Path) -> List[Tuple[float, float]]:
        """
        Read a tabulated spectrum with header ``q_mm_inv,counts``.

        Raises:
            FileNotFoundError: If the file does not exist.
            ValueError: On a wrong header or malformed rows.
        """
        return self._read_pairs(Path(path), SPECTRUM_HEADER)

    def render_csv(self, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        """Render rows as comma-separated text with a header line."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
        return buffer.getvalue()

    def render_json(self, data: Any) -> str:
        """Render data as sorted, indented JSON with 12-digit floats."""
        text = json.dumps(_rounded(data), indent=2, sort_keys=True, ensure_ascii=False)
        return text + "\n"

    def write_text(self, text: str, path: Optional[Path]) -> None:
        """Write text to ``path``, creating parent directories."""
        if path is None:
            raise ValueError("An output path is required")
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")

    @staticmethod
    def _read_pairs(path: Path, header: Tuple[str, str]) -> List[Tuple[float, float]]:
        with path.open(newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            first = next(reader, None)
            if first is None or tuple(cell.strip() for cell in first) != header:
                expected = ",".join(header)
                raise ValueError(f"{path} must start with the header {expected}")
            rows = []
            for number, record in enumerate(reader, start=2):
                if not record or all(not cell.strip() for cell in record):
                    continue
                if len(record) != 2:
                    raise ValueError(f"{path} line {number}: expected 2 columns")
                try:
                    pair = (float(record[0]), float(record[1]))
                except ValueError:
                    message = f"{path} line {number}: non-numeric value"
                    raise ValueError(message) from None
                if not all(math.isfinite(v) for v in pair):
                    raise ValueError(f"{path} line {number}: non-finite value")
                rows.append(pair)
        return rows


def _rounded(data: Any) -> Any:
    if isinstance(data, float):
        return round_significant(data)
    if isinstance(data, dict):
        return {key: _rounded(value) for key, value in data.items()}
    if isinstance(data, (list, tuple)):
        return [_rounded(value) for value in data]
    return data
