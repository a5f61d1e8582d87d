"""
Service de lecture/écriture des traces et d'ingestion des compteurs
"""

import io
import json
import re
import struct
from contextlib import contextmanager
from pathlib import Path
from typing import BinaryIO, Iterator, List, Optional, TextIO, Tuple

import numpy as np
import pandas as pd
import structlog

from ..config import CHUNK_EVENTS
from ..exceptions import (
    CounterParseError,
    CounterSchemaError,
    ParameterError,
    TraceCorruptionError,
    TraceFormatError,
    WPCIOError,
)
from ..models import (
    EVENT_DTYPE,
    FLAG_KERNEL,
    FLAG_TAKEN,
    EventKind,
    Level,
    Trace,
    array_to_events,
)
from ..schemas import CounterRecord

logger = structlog.get_logger(__name__)

MAGIC = b"WPC1"
FORMAT_VERSION = 1
RECORD_SIZE = EVENT_DTYPE.itemsize  # 20 octets

JSONL_FORMAT = "WPC1-jsonl"

COUNTER_COLUMNS = [
    "workload",
    "instructions",
    "l1i_misses",
    "l1d_misses",
    "branch_mispredictions",
    "config",
]


# === FORMAT BINAIRE ===

def encode_header(trace: Trace) -> bytes:
    """Encoder l'en-tête binaire d'une trace"""
    parts = [MAGIC, struct.pack("<HBB", FORMAT_VERSION, trace.level.code, 0)]
    name = trace.workload_name.encode("utf-8")
    parts.append(struct.pack("<H", len(name)) + name)
    parts.append(struct.pack("<H", len(trace.tag_table)))
    for tag in trace.tag_table:
        encoded = tag.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
    if trace.seed is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<BQ", 1, trace.seed))
    parts.append(struct.pack("<Q", len(trace)))
    return b"".join(parts)


def write_trace(trace: Trace, destination: BinaryIO, chunk_events: int = CHUNK_EVENTS) -> int:
    """Écrire une trace au format binaire; retourne le nombre d'octets écrits"""
    written = 0
    try:
        header = encode_header(trace)
        destination.write(header)
        written += len(header)
        for chunk in trace.chunks(chunk_events):
            payload = chunk.tobytes()
            destination.write(payload)
            written += len(payload)
    except OSError as e:
        raise WPCIOError(f"Échec d'écriture de la trace: {e}", position=written) from e

    logger.debug("trace written", workload=trace.workload_name, events=len(trace), bytes=written)
    return written


class TraceReader:
    """Lecteur en flux: en-tête lu immédiatement, événements consommés par blocs"""

    def __init__(self, source: BinaryIO):
        self.source = source
        self.position = 0
        self._consumed = False
        self._read_header()

    def _read_exact(self, size: int, what: str) -> bytes:
        try:
            data = self.source.read(size)
        except OSError as e:
            raise WPCIOError(f"Échec de lecture ({what}): {e}", position=self.position) from e
        if len(data) < size:
            raise TraceFormatError(f"En-tête tronqué ({what})", position=self.position)
        self.position += size
        return data

    def _read_string(self, what: str) -> str:
        (length,) = struct.unpack("<H", self._read_exact(2, what))
        raw = self._read_exact(length, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise TraceFormatError(f"UTF-8 invalide ({what})", position=self.position) from e

    def _read_header(self) -> None:
        magic = self._read_exact(4, "magic")
        if magic != MAGIC:
            raise TraceFormatError(f"Magic invalide: {magic!r}", position=0)
        version, level_code, _reserved = struct.unpack("<HBB", self._read_exact(4, "version"))
        if version != FORMAT_VERSION:
            raise TraceFormatError(f"Version non supportée: {version}", position=4)
        try:
            self.level = Level.from_code(level_code)
        except ValueError as e:
            raise TraceFormatError(str(e), position=6) from e
        self.workload_name = self._read_string("nom")
        (tag_count,) = struct.unpack("<H", self._read_exact(2, "tags"))
        self.tag_table: Tuple[str, ...] = tuple(self._read_string("tag") for _ in range(tag_count))
        (seed_present,) = struct.unpack("<B", self._read_exact(1, "graine"))
        self.seed: Optional[int] = None
        if seed_present:
            (self.seed,) = struct.unpack("<Q", self._read_exact(8, "graine"))
        (self.event_count,) = struct.unpack("<Q", self._read_exact(8, "nombre d'événements"))
        self.header_size = self.position

    def _check_records(self, records: np.ndarray, offset: int) -> None:
        bad_kind = np.flatnonzero(records["kind"] > EventKind.BRANCH)
        if bad_kind.size:
            index = offset + int(bad_kind[0])
            raise TraceFormatError(
                f"Type d'événement inconnu ({int(records['kind'][bad_kind[0]])}) à l'index {index}",
                position=self.header_size + index * RECORD_SIZE,
            )
        bad_tag = np.flatnonzero(records["tag_id"] >= len(self.tag_table))
        if bad_tag.size:
            index = offset + int(bad_tag[0])
            raise TraceFormatError(
                f"tag_id hors table à l'index {index}",
                position=self.header_size + index * RECORD_SIZE,
            )
        compute = records["kind"] == EventKind.COMPUTE
        bad_compute = np.flatnonzero(compute & (records["data_addr"] != 0))
        if bad_compute.size:
            index = offset + int(bad_compute[0])
            raise TraceFormatError(
                f"Compute avec adresse de donnée à l'index {index}",
                position=self.header_size + index * RECORD_SIZE,
            )

    def chunks(self, size: int = CHUNK_EVENTS) -> Iterator[np.ndarray]:
        """Itérer sur les événements par blocs (lecture unique)"""
        if self._consumed:
            raise WPCIOError("Flux de trace déjà consommé", position=self.position)
        self._consumed = True
        index = 0
        while index < self.event_count:
            wanted = min(size, self.event_count - index)
            try:
                data = self.source.read(wanted * RECORD_SIZE)
            except OSError as e:
                raise WPCIOError(f"Échec de lecture: {e}", position=self.position) from e
            self.position += len(data)
            complete = len(data) // RECORD_SIZE
            if complete < wanted:
                raise TraceCorruptionError(index + complete, position=self.position)
            records = np.frombuffer(data, dtype=EVENT_DTYPE)
            self._check_records(records, index)
            yield records
            index += wanted

    iter_chunks = chunks

    def iter_events(self, size: int = CHUNK_EVENTS):
        for records in self.chunks(size):
            yield from array_to_events(records)

    def read_all(self) -> Trace:
        blocks = list(self.chunks())
        events = np.concatenate(blocks) if blocks else np.zeros(0, dtype=EVENT_DTYPE)
        return Trace(self.level, self.workload_name, self.tag_table, events, self.seed)


def read_trace(source: BinaryIO) -> Trace:
    """Lire une trace binaire complète"""
    return TraceReader(source).read_all()


def trace_to_bytes(trace: Trace) -> bytes:
    buffer = io.BytesIO()
    write_trace(trace, buffer)
    return buffer.getvalue()


# === FORMAT TEXTE (JSON-lines) ===

def write_trace_jsonl(trace: Trace, sink: TextIO) -> int:
    """Écrire la trace au format JSON-lines; retourne le nombre de caractères"""
    header = {
        "format": JSONL_FORMAT,
        "version": FORMAT_VERSION,
        "level": trace.level.value,
        "workload": trace.workload_name,
        "tags": list(trace.tag_table),
        "seed": trace.seed,
        "events": len(trace),
    }
    written = 0
    try:
        line = json.dumps(header) + "\n"
        sink.write(line)
        written += len(line)
        for event in trace:
            line = json.dumps({
                "kind": event.kind.label,
                "taken": event.taken,
                "kernel": event.kernel_mode,
                "tag": event.tag_id,
                "instr_addr": event.instr_addr,
                "addr": event.data_or_target_addr,
            }) + "\n"
            sink.write(line)
            written += len(line)
    except OSError as e:
        raise WPCIOError(f"Échec d'écriture de la trace texte: {e}", position=written) from e
    return written


def read_trace_jsonl(source: TextIO) -> Trace:
    """Lire une trace au format JSON-lines"""
    lines = (line for line in source if line.strip())
    try:
        header = json.loads(next(lines))
    except StopIteration:
        raise TraceFormatError("Trace texte vide", position=0)
    except json.JSONDecodeError as e:
        raise TraceFormatError(f"En-tête JSON invalide: {e}", position=0) from e
    if not isinstance(header, dict) or header.get("format") != JSONL_FORMAT:
        raise TraceFormatError(f"Format texte inconnu: {header!r:.80}", position=0)
    try:
        level = Level(header["level"])
        workload_name = str(header["workload"])
        tags = tuple(header["tags"])
        expected_events = int(header["events"])
    except (KeyError, TypeError, ValueError) as e:
        raise TraceFormatError(f"En-tête texte invalide: {e!r}", position=0) from e

    rows = []
    for index, line in enumerate(lines):
        try:
            record = json.loads(line)
            kind = EventKind.from_label(record["kind"])
            flags = (FLAG_TAKEN if record.get("taken") else 0) | (FLAG_KERNEL if record.get("kernel") else 0)
            rows.append((int(kind), flags, int(record.get("tag", 0)), int(record["instr_addr"]),
                         int(record.get("addr", 0))))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as e:
            raise TraceFormatError(f"Événement {index} invalide: {e!r}") from e

    if len(rows) != expected_events:
        raise TraceCorruptionError(len(rows))
    try:
        events = np.array(rows, dtype=EVENT_DTYPE)
        return Trace(level, workload_name, tags, events, header.get("seed"))
    except (ParameterError, OverflowError, ValueError) as e:
        raise TraceFormatError(f"Trace texte invalide: {e}") from e


# === FICHIERS ===

def is_text_trace(path: Path) -> bool:
    return Path(path).suffix == ".jsonl"


def save_trace(trace: Trace, path) -> int:
    """Enregistrer une trace (format choisi selon l'extension)"""
    path = Path(path)
    try:
        if is_text_trace(path):
            with open(path, "w", encoding="utf-8") as sink:
                return write_trace_jsonl(trace, sink)
        with open(path, "wb") as sink:
            return write_trace(trace, sink)
    except OSError as e:
        raise WPCIOError(f"Impossible d'écrire {path}: {e}") from e


def load_trace(path) -> Trace:
    """Charger une trace complète"""
    path = Path(path)
    try:
        if is_text_trace(path):
            with open(path, "r", encoding="utf-8") as source:
                return read_trace_jsonl(source)
        with open(path, "rb") as source:
            return read_trace(source)
    except OSError as e:
        raise WPCIOError(f"Impossible de lire {path}: {e}") from e


@contextmanager
def open_trace(path):
    """Ouvrir une trace en flux (TraceReader pour le binaire, Trace pour le texte)"""
    path = Path(path)
    if is_text_trace(path):
        yield load_trace(path)
        return
    try:
        source = open(path, "rb")
    except OSError as e:
        raise WPCIOError(f"Impossible de lire {path}: {e}") from e
    with source:
        yield TraceReader(source)


# === COMPTEURS ===

def _parse_count(value: str, column: str, line: int) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise CounterParseError(line, f"valeur non numérique pour {column}: {value!r}")


def read_counters(source: TextIO) -> List[CounterRecord]:
    """Lire un CSV de compteurs matériels"""
    try:
        # En-tête lu comme une ligne ordinaire: chaque ligne doit avoir autant de champs
        frame = pd.read_csv(
            source,
            header=None,
            index_col=False,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError:
        raise CounterSchemaError(COUNTER_COLUMNS[0])
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise CounterParseError(int(match.group(1)) if match else 0, "nombre de champs incorrect") from e

    columns = [str(column).strip() for column in frame.iloc[0]]
    for column in COUNTER_COLUMNS:
        if column not in columns:
            raise CounterSchemaError(column)
    frame = frame.iloc[1:]
    frame.columns = columns

    records = []
    for position, row in enumerate(frame.to_dict(orient="records")):
        line = position + 2  # ligne 1 = en-tête
        if all(pd.isna(value) or not str(value).strip() for value in row.values()):
            continue
        if any(pd.isna(value) for value in row.values()):
            raise CounterParseError(line, f"{len(columns)} champs attendus")
        counts = {
            column: _parse_count(row[column], column, line)
            for column in ("instructions", "l1i_misses", "l1d_misses", "branch_mispredictions")
        }
        if counts["instructions"] <= 0:
            raise CounterParseError(line, "instructions doit être strictement positif")
        negative = [column for column, count in counts.items() if count < 0]
        if negative:
            raise CounterParseError(line, f"compte négatif pour {negative[0]}")
        records.append(CounterRecord(
            workload_name=row["workload"].strip(),
            config_label=row["config"].strip() or "default",
            **counts,
        ))

    logger.info("counters ingested", records=len(records))
    return records
