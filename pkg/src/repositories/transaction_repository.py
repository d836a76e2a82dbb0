from datetime import datetime
from typing import Dict, Iterable, List, Optional, Tuple
import csv
import json
import logging
import math

import pytz

from exceptions import (
    ConfigurationError,
    FileEncodingError,
    IngestError,
    InvalidSpecError,
    RowParseError,
    SchemaMismatchError,
)
from models.domain_models import (
    FitReport,
    SchemaConfig,
    TransactionBatch,
    TransactionRecord,
    TransactionStatus,
)
from .base_repository import BaseRepository

# Get loggers
app_logger = logging.getLogger('app')
error_logger = logging.getLogger('error')


class CsvTransactionRepository(BaseRepository[TransactionBatch]):
    """Transaction extracts stored as UTF-8 CSV with a header row."""

    def __init__(self, schema: Optional[SchemaConfig] = None):
        self.schema = schema or SchemaConfig()
        try:
            self.tz = pytz.timezone(self.schema.timezone)
        except pytz.UnknownTimeZoneError:
            raise ConfigurationError(f"Unknown time zone: {self.schema.timezone}")

    def load_transactions(self, path: str, schema: Optional[SchemaConfig] = None) -> TransactionBatch:
        """Parse ``path``; rows that fail are collected in ``batch.errors``."""
        if schema is not None and schema != self.schema:
            return CsvTransactionRepository(schema).load(path)
        return self.load(path)

    def load(self, path: str) -> TransactionBatch:
        self._require_file(path)
        app_logger.info(f"Loading transactions from {path}")
        try:
            records, errors = self._read_rows(path)
        except UnicodeDecodeError as e:
            error_msg = f"{path}: not valid UTF-8 at byte {e.start}"
            error_logger.error(error_msg)
            raise FileEncodingError(error_msg)

        records.sort(key=lambda r: r.timestamp)
        app_logger.info(f"Loaded {len(records)} transactions ({len(errors)} rejected rows)")
        return TransactionBatch(records=records, errors=errors)

    def _read_rows(self, path: str) -> Tuple[List[TransactionRecord], List[Exception]]:
        records, errors = [], []
        with open(path, newline='', encoding='utf-8') as csvfile:
            reader = csv.DictReader(csvfile)
            header = reader.fieldnames or []
            missing = [c for c in self.schema.required_columns() if c not in header]
            if missing:
                error_msg = f"{path}: header lacks column(s) {', '.join(missing)}"
                error_logger.error(error_msg)
                raise SchemaMismatchError(error_msg)

            for row in reader:
                try:
                    records.append(self._parse_row(row))
                except RowParseError as e:
                    # reader.line_num is the last physical line read
                    e = RowParseError(reader.line_num, e.reason)
                    error_logger.error(f"{path}: {e}")
                    errors.append(e)
        return records, errors

    def _parse_row(self, row: Dict[str, str]) -> TransactionRecord:
        s = self.schema
        if None in row:
            raise RowParseError(0, "more fields than header columns")
        values = {c: row.get(c) for c in s.required_columns()}
        absent = [c for c, v in values.items() if v is None]
        if absent:
            raise RowParseError(0, f"missing field(s) {', '.join(absent)}")

        try:
            amount = float(values[s.amount])
        except ValueError:
            raise RowParseError(0, f"amount {values[s.amount]!r} is not a number")
        if not math.isfinite(amount):
            raise RowParseError(0, f"amount {values[s.amount]!r} is not finite")

        timestamp = self._parse_timestamp(values[s.timestamp])

        raw_status = values[s.status].strip().lower()
        try:
            status = TransactionStatus(raw_status)
        except ValueError:
            raise RowParseError(0, f"status {values[s.status]!r} is neither approved nor declined")

        reason = (row.get(s.decline_reason) or "").strip() or None
        return TransactionRecord(
            account_id=values[s.account_id].strip(),
            timestamp=timestamp,
            amount=amount,
            merchant_category=values[s.merchant_category].strip(),
            status=status,
            decline_reason=reason,
        )

    def _parse_timestamp(self, raw: str) -> float:
        text = raw.strip()
        try:
            value = float(text)
        except ValueError:
            try:
                dt = datetime.fromisoformat(text.replace('Z', '+00:00'))
            except ValueError:
                raise RowParseError(0, f"timestamp {raw!r} is neither epoch seconds nor ISO-8601")
            if dt.tzinfo is None:
                dt = self.tz.localize(dt)
            value = dt.timestamp()
        if not math.isfinite(value):
            raise RowParseError(0, f"timestamp {raw!r} is not finite")
        return value

    def save(self, path: str, entity: TransactionBatch) -> None:
        self.save_records(path, entity.records)

    def save_records(self, path: str, records: Iterable[TransactionRecord]) -> None:
        """Write records with the configured column names, timestamps as epoch seconds."""
        s = self.schema
        self._ensure_parent(path)
        count = 0
        with open(path, 'w', newline='', encoding='utf-8') as csvfile:
            fieldnames = [s.account_id, s.timestamp, s.amount, s.merchant_category, s.status, s.decline_reason]
            writer = csv.DictWriter(csvfile, fieldnames=fieldnames)
            writer.writeheader()
            for record in records:
                writer.writerow({
                    s.account_id: record.account_id,
                    s.timestamp: f"{record.timestamp:.0f}",
                    s.amount: f"{record.amount:.2f}",
                    s.merchant_category: record.merchant_category,
                    s.status: record.status.value,
                    s.decline_reason: record.decline_reason or "",
                })
                count += 1
        app_logger.info(f"Wrote {count} transactions to {path}")


class JsonFitReportRepository(BaseRepository[FitReport]):
    """FitReport documents with the fixed field names of ``FitReport.FIELDS``."""

    def load(self, path: str) -> FitReport:
        self._require_file(path)
        try:
            with open(path, encoding='utf-8') as f:
                data = json.load(f)
            return FitReport.from_dict(data)
        except UnicodeDecodeError as e:
            error_msg = f"{path}: not valid UTF-8 at byte {e.start}"
            error_logger.error(error_msg)
            raise FileEncodingError(error_msg)
        except (ValueError, TypeError, InvalidSpecError) as e:
            error_msg = f"Could not read fit report {path}: {e}"
            error_logger.error(error_msg)
            raise IngestError(error_msg)

    def save(self, path: str, entity: FitReport) -> None:
        self._ensure_parent(path)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(entity.to_dict(), f, indent=2)
        app_logger.info(f"Saved fit report to {path}")
