"""
檔案 I/O: CSV/TSV 序列（分塊串流讀取）、標籤 JSON、NDJSON 事件紀錄、trace CSV
"""
import logging
import re
from pathlib import Path
from typing import IO, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, TypeAdapter, ValidationError

from app.config import settings
from app.exceptions import (
    InvalidSeriesException,
    OutputPathException,
    ParseException,
    ValidationException,
)
from app.models.report import Record, TraceRow
from app.services.correlation import SeriesFrame

logger = logging.getLogger(__name__)

DELIMITERS = {"comma": ",", "tab": "\t"}

TRACE_COLUMNS = ["t", "d_t", "r_prev", "D", "y", "rho", "event"]

_LINE_PATTERN = re.compile(r"line (\d+)")
_labels_adapter = TypeAdapter(List[int])
_record_adapter = TypeAdapter(Record)

ColumnSelector = Union[str, int]


class SeriesReader:
    """
    分塊讀取 CSV/TSV（列 = 時間、欄 = 序列），逐塊產生 float64 陣列

    數值解析與語系無關（小數點只接受 "."）；欄位數不一致或非數值儲存格
    會以 ParseException 回報列號（1 起算，含標題列）。
    """

    def __init__(
        self,
        path: Union[str, Path],
        delimiter: str = "comma",
        header: bool = True,
        columns: Optional[Sequence[ColumnSelector]] = None,
        chunk_rows: Optional[int] = None,
    ):
        if delimiter not in DELIMITERS:
            raise ValidationException(f"不支援的分隔符號: {delimiter}（可用: {', '.join(DELIMITERS)}）")
        self.path = Path(path)
        self.separator = DELIMITERS[delimiter]
        self.header = header
        self.requested = list(columns) if columns else None
        self.chunk_rows = chunk_rows or settings.csv_chunk_rows
        self.columns: Optional[Tuple[str, ...]] = None
        self.rows_read = 0

    def _resolve_columns(self, chunk: pd.DataFrame) -> List:
        available = list(chunk.columns)
        if self.requested is None:
            return available
        selected = []
        for item in self.requested:
            if isinstance(item, int) or (isinstance(item, str) and item.isdigit() and item not in available):
                position = int(item)
                if not 0 <= position < len(available):
                    raise ValidationException(f"欄位索引 {position} 超出範圍（共 {len(available)} 欄）")
                selected.append(available[position])
            elif item in available:
                selected.append(item)
            else:
                raise ValidationException(f"找不到欄位: {item}")
        return selected

    def _line_number(self, offset: int) -> int:
        return offset + 1 + (1 if self.header else 0)

    def __iter__(self) -> Iterator[np.ndarray]:
        try:
            reader = pd.read_csv(
                self.path,
                sep=self.separator,
                header=0 if self.header else None,
                dtype=str,
                keep_default_na=False,
                chunksize=self.chunk_rows,
            )
        except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
            raise ParseException(f"無法讀取檔案 {self.path}: {exc}") from exc
        except pd.errors.EmptyDataError as exc:
            raise ParseException(f"檔案 {self.path} 沒有資料") from exc

        selected = None
        with reader:
            try:
                for chunk in reader:
                    if selected is None:
                        selected = self._resolve_columns(chunk)
                        if len(selected) < 2:
                            raise InvalidSeriesException(f"至少需要 2 條序列，實際為 {len(selected)}")
                        self.columns = tuple(str(name) for name in selected)
                    yield self._convert(chunk, selected)
            except pd.errors.ParserError as exc:
                match = _LINE_PATTERN.search(str(exc))
                row = int(match.group(1)) if match else None
                raise ParseException("欄位數不一致", row=row, details={"reason": str(exc)}) from exc
            except pd.errors.EmptyDataError as exc:
                raise ParseException(f"檔案 {self.path} 沒有資料") from exc

    def _check_field_count(self, chunk: pd.DataFrame) -> None:
        # 欄位太少的列會被 pandas 以 NaN 補齊（dtype=str 下正常儲存格不會是 NaN）
        missing = chunk.isna().to_numpy()
        if not missing.any():
            return
        position = int(np.argmax(missing.any(axis=1)))
        present = int((~missing[position]).sum())
        row = self._line_number(self.rows_read + position)
        self.rows_read += position
        raise ParseException(
            f"欄位數不足: 預期 {chunk.shape[1]} 個，實際 {present} 個",
            row=row,
            details={"row": row, "expected_fields": chunk.shape[1], "actual_fields": present},
        )

    def _convert(self, chunk: pd.DataFrame, selected: List) -> np.ndarray:
        self._check_field_count(chunk)
        chunk = chunk[selected]
        numeric = chunk.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(numeric)
        if bad.any():
            position = int(np.argmax(bad.any(axis=1)))
            column = chunk.columns[int(np.argmax(bad[position]))]
            raw = chunk.iloc[position][column]
            row = self._line_number(self.rows_read + position)
            self.rows_read += position
            raise ParseException(
                f"欄位 {column} 不是有效數值: {raw!r}",
                row=row,
                details={"row": row, "column": str(column)},
            )
        self.rows_read += len(numeric)
        return numeric


def read_frame(
    path: Union[str, Path],
    delimiter: str = "comma",
    header: bool = True,
    columns: Optional[Sequence[ColumnSelector]] = None,
) -> SeriesFrame:
    reader = SeriesReader(path, delimiter=delimiter, header=header, columns=columns)
    chunks = list(reader)
    if not chunks:
        raise ParseException(f"檔案 {path} 沒有資料列")
    return SeriesFrame(np.vstack(chunks), columns=reader.columns)


def _write_text(path: Union[str, Path], text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputPathException(str(path)) from exc


def write_frame(frame: SeriesFrame, path: Union[str, Path]) -> None:
    """寫出 CSV（含標題列）"""
    table = pd.DataFrame(frame.values, columns=list(frame.column_names()))
    _write_text(path, table.to_csv(index=False, lineterminator="\n"))


def read_labels(path: Union[str, Path]) -> List[int]:
    """讀取 JSON 整數陣列，回傳排序後的結果"""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ParseException(f"無法讀取標籤檔 {path}: {exc}") from exc
    try:
        labels = _labels_adapter.validate_json(raw)
    except ValidationError as exc:
        raise ParseException(f"標籤檔 {path} 必須是 JSON 整數陣列") from exc
    if any(label < 0 for label in labels):
        raise ParseException(f"標籤檔 {path} 含有負的索引")
    return sorted(labels)


def write_labels(labels: Sequence[int], path: Union[str, Path]) -> None:
    _write_text(path, _labels_adapter.dump_json(list(labels)).decode() + "\n")


def write_record(stream: IO[str], record: BaseModel) -> None:
    """寫一行 NDJSON 並立即 flush（事件即時輸出）"""
    stream.write(record.model_dump_json() + "\n")
    stream.flush()


def read_records(path: Union[str, Path]) -> List[BaseModel]:
    """讀取 detect 產生的 NDJSON"""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ParseException(f"無法讀取事件檔 {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(_record_adapter.validate_json(line))
        except ValidationError as exc:
            raise ParseException("無法解析的紀錄", row=lineno) from exc
    return records


def trace_table(rows: Sequence[TraceRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            [row.t, row.distance, row.radius, row.score, row.cusum, row.threshold, int(row.event)]
            for row in rows
        ],
        columns=TRACE_COLUMNS,
    )


def write_trace(rows: Sequence[TraceRow], path: Union[str, Path]) -> None:
    """寫出欄位為 (t, d_t, r_prev, D, y, rho, event) 的 CSV"""
    _write_text(path, trace_table(rows).to_csv(index=False, lineterminator="\n"))


def write_json(payload: object, path: Union[str, Path]) -> None:
    adapter = TypeAdapter(type(payload))
    _write_text(path, adapter.dump_json(payload, indent=2).decode() + "\n")
