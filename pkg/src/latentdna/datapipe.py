"""Promoter corpus construction: windowing, ingestion, filtering, splitting, storage."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import logging
import os
import re
import struct
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .seqcodec import CHANNEL_ORDER, NucleotideSequence, SequenceError, parse_fasta

log = logging.getLogger(__name__)

WINDOW = 2048
UPSTREAM = 1024
METADATA_COLUMNS = ("pid", "species", "sample_name", "expression_value", "gene_description")
SPLITS = ("train", "validation")


class WindowError(ValueError):
    """Requested window runs past the ends of the source sequence."""


class DataIntegrityError(ValueError):
    pass


class CorruptTableError(ValueError):
    pass


@dataclass(frozen=True)
class PromoterRecord:
    pid: str
    species: str
    sequence: NucleotideSequence
    tss_offset: int
    expression_samples: tuple[tuple[str, float], ...] = ()
    gene_description: str = ""


@dataclass(frozen=True)
class Provenance:
    sources: tuple[tuple[str, str], ...] = ()  # (file name, sha256 hex)
    ingested_at: str = ""


@dataclass(frozen=True)
class DatasetTable:
    records: tuple[PromoterRecord, ...] = ()
    provenance: Provenance = field(default_factory=Provenance)
    splits: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.splits is None:
            object.__setattr__(self, "splits", ("train",) * len(self.records))
        if len(self.splits) != len(self.records):
            raise DataIntegrityError("split labels must cover every record")
        bad = set(self.splits) - set(SPLITS)
        if bad:
            raise DataIntegrityError(f"unknown split labels {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.records)

    def subset(self, split: str) -> list[PromoterRecord]:
        return [r for r, s in zip(self.records, self.splits) if s == split]

    def sequences(self, split: str | None = None) -> list[NucleotideSequence]:
        if split is None:
            return [r.sequence for r in self.records]
        return [r.sequence for r in self.subset(split)]

    def summary(self) -> dict:
        """Counts comparable to the EPDnew statistics table."""
        species = Counter(r.species for r in self.records)
        genes = {r.gene_description for r in self.records if r.gene_description}
        samples = {name for r in self.records for name, _ in r.expression_samples}
        return {
            "promoters": len({r.pid for r in self.records}),
            "sequences": len(self.records),
            "genes": len(genes),
            "species": len([s for s in species if s]),
            "species_counts": dict(sorted(species.items())),
            "samples": len(samples),
            "expression_values": sum(len(r.expression_samples) for r in self.records),
            "split_counts": dict(Counter(self.splits)),
        }


# ---------------------------------------------------------------------------
# windowing and ingestion
# ---------------------------------------------------------------------------

def extract_window(sequence: str, tss_index: int, window: int = WINDOW) -> NucleotideSequence:
    """Slice ``[tss - window/2, tss + window/2 - 1]``; the TSS lands at ``window/2``."""
    seq = NucleotideSequence(sequence)
    up = window // 2
    start, stop = tss_index - up, tss_index + (window - up)
    if start < 0 or stop > len(seq):
        raise WindowError(
            f"window [{start}, {stop - 1}] around TSS {tss_index} exceeds sequence of length {len(seq)}"
        )
    return NucleotideSequence(seq[start:stop])


_TSS_RE = re.compile(r"(?:^|\s)tss=(-?\d+)(?:\s|$)")


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_metadata(path) -> dict[str, dict]:
    """Parse the five-column tab-separated metadata file.

    Returns ``pid -> {"species", "gene_description", "samples"}``. Malformed
    rows are logged and skipped.
    """
    meta: dict[str, dict] = {}
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            return meta
        if tuple(h.strip().lower() for h in header) != METADATA_COLUMNS:
            raise DataIntegrityError(f"{path}: header must be {METADATA_COLUMNS}, got {tuple(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(METADATA_COLUMNS):
                log.warning("%s:%d: expected %d columns, got %d; row skipped", path, lineno,
                            len(METADATA_COLUMNS), len(row))
                continue
            pid, species, sample, value, desc = (c.strip() for c in row)
            if not pid:
                log.warning("%s:%d: empty pid; row skipped", path, lineno)
                continue
            if sample or value:
                try:
                    val = float(value)
                except ValueError:
                    log.warning("%s:%d: bad expression value %r; row skipped", path, lineno, value)
                    continue
            entry = meta.setdefault(pid, {"species": species, "gene_description": desc, "samples": []})
            if species and entry["species"] and species != entry["species"]:
                log.warning("%s:%d: pid %s listed under species %r and %r; keeping the first",
                            path, lineno, pid, entry["species"], species)
            entry["species"] = entry["species"] or species
            entry["gene_description"] = entry["gene_description"] or desc
            if sample or value:
                entry["samples"].append((sample, val))
    return meta


def ingest(fasta_paths: Sequence, metadata_paths: Sequence = (), window: int = WINDOW,
           timestamp: str | None = None) -> DatasetTable:
    """Join FASTA promoters with metadata into a de-duplicated table.

    A FASTA header is ``pid [tss=<index>] [free text]``. Records carrying a
    ``tss=`` index are windowed around it; records without one must already
    be exactly ``window`` bases long (TSS at the centre). Records whose
    window does not fit are skipped and logged, never padded.
    """
    sources = []
    meta: dict[str, dict] = {}
    for path in metadata_paths:
        sources.append((os.path.basename(str(path)), _file_digest(path)))
        for pid, entry in read_metadata(path).items():
            if pid in meta:
                meta[pid]["samples"].extend(entry["samples"])
            else:
                meta[pid] = entry

    records: list[PromoterRecord] = []
    by_pid: dict[str, NucleotideSequence] = {}
    seen_seqs: set[str] = set()
    skipped = Counter()
    for path in fasta_paths:
        sources.append((os.path.basename(str(path)), _file_digest(path)))
        with open(path, encoding="utf-8") as f:
            entries = parse_fasta(f)
        for header, seq in entries:
            pid = header.split()[0] if header.split() else ""
            if not pid:
                raise DataIntegrityError(f"{path}: record with empty identifier")
            m = _TSS_RE.search(header)
            try:
                if m:
                    win = extract_window(seq, int(m.group(1)), window)
                elif len(seq) == window:
                    win = seq
                else:
                    raise WindowError(f"length {len(seq)} != {window} and no tss= annotation")
            except WindowError as exc:
                log.warning("%s: record %s skipped: %s", path, pid, exc)
                skipped["window"] += 1
                continue
            if pid in by_pid:
                if by_pid[pid] != win:
                    raise DataIntegrityError(f"pid {pid} appears with two different sequences")
                skipped["duplicate_pid"] += 1
                continue
            if win in seen_seqs:
                skipped["duplicate_sequence"] += 1
                continue
            by_pid[pid] = win
            seen_seqs.add(win)
            entry = meta.get(pid, {})
            records.append(PromoterRecord(
                pid=pid,
                species=entry.get("species", ""),
                sequence=win,
                tss_offset=window // 2,
                expression_samples=tuple(entry.get("samples", ())),
                gene_description=entry.get("gene_description", ""),
            ))
    if skipped:
        log.info("ingest skipped: %s", dict(skipped))
    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    return DatasetTable(tuple(records), Provenance(tuple(sources), timestamp))


def filter_species(table: DatasetTable, species: Iterable[str]) -> DatasetTable:
    keep = set(species)
    idx = [i for i, r in enumerate(table.records) if r.species in keep]
    return replace(
        table,
        records=tuple(table.records[i] for i in idx),
        splits=tuple(table.splits[i] for i in idx),
    )


def split(table: DatasetTable, validation_fraction: float, seed: int) -> DatasetTable:
    """Seeded shuffle, then the first ``round(f * n)`` go to validation."""
    if not 0.0 <= validation_fraction <= 1.0:
        raise ValueError("validation_fraction must lie in [0, 1]")
    n = len(table)
    n_val = int(round(validation_fraction * n))
    perm = np.random.default_rng(seed).permutation(n)
    labels = ["train"] * n
    for i in perm[:n_val]:
        labels[int(i)] = "validation"
    return replace(table, splits=tuple(labels))


# ---------------------------------------------------------------------------
# DDTB container
# ---------------------------------------------------------------------------
# b"DDTB" | u16 version | u16 reserved | str channel order | u32 n_sources
# (str name, str sha256)* | str timestamp | u64 n_records | record*
# record: str pid | str species | u8 split | u32 tss | u32 length
#         | 2-bit bases (ceil(L/4) bytes) | u8 has_n | [N bitmap ceil(L/8)]
#         | u32 n_samples | (str name, f64 value)* | str gene_description
# str = u32 byte length + UTF-8; every integer little-endian.

TABLE_MAGIC = b"DDTB"
TABLE_VERSION = 1
_BASE_CODE = np.zeros(256, dtype=np.uint8)
for _i, _b in enumerate(CHANNEL_ORDER):
    _BASE_CODE[ord(_b)] = _i
_CODE_BASE = np.frombuffer(CHANNEL_ORDER.encode(), dtype=np.uint8)


def _pack_bases(seq: str) -> tuple[bytes, bytes | None]:
    raw = np.frombuffer(seq.encode("ascii"), dtype=np.uint8)
    codes = _BASE_CODE[raw]
    pad = (-len(codes)) % 4
    quads = np.concatenate([codes, np.zeros(pad, np.uint8)]).reshape(-1, 4)
    packed = (quads[:, 0] | quads[:, 1] << 2 | quads[:, 2] << 4 | quads[:, 3] << 6).astype(np.uint8)
    is_n = raw == ord("N")
    bitmap = np.packbits(is_n, bitorder="little").tobytes() if is_n.any() else None
    return packed.tobytes(), bitmap


def _unpack_bases(packed: bytes, bitmap: bytes | None, length: int) -> NucleotideSequence:
    p = np.frombuffer(packed, dtype=np.uint8)
    codes = np.stack([p & 3, (p >> 2) & 3, (p >> 4) & 3, (p >> 6) & 3], axis=1).reshape(-1)[:length]
    chars = _CODE_BASE[codes].copy()
    if bitmap is not None:
        is_n = np.unpackbits(np.frombuffer(bitmap, dtype=np.uint8), bitorder="little")[:length].astype(bool)
        chars[is_n] = ord("N")
    return NucleotideSequence(chars.tobytes().decode("ascii"))


def _wstr(buf: io.BytesIO, s: str) -> None:
    raw = s.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def dumps_table(table: DatasetTable) -> bytes:
    buf = io.BytesIO()
    buf.write(TABLE_MAGIC)
    buf.write(struct.pack("<HH", TABLE_VERSION, 0))
    _wstr(buf, CHANNEL_ORDER)
    buf.write(struct.pack("<I", len(table.provenance.sources)))
    for name, digest in table.provenance.sources:
        _wstr(buf, name)
        _wstr(buf, digest)
    _wstr(buf, table.provenance.ingested_at)
    buf.write(struct.pack("<Q", len(table.records)))
    for rec, lab in zip(table.records, table.splits):
        _wstr(buf, rec.pid)
        _wstr(buf, rec.species)
        packed, bitmap = _pack_bases(rec.sequence)
        buf.write(struct.pack("<BII", SPLITS.index(lab), rec.tss_offset, len(rec.sequence)))
        buf.write(packed)
        buf.write(struct.pack("<B", bitmap is not None))
        if bitmap is not None:
            buf.write(bitmap)
        buf.write(struct.pack("<I", len(rec.expression_samples)))
        for name, value in rec.expression_samples:
            _wstr(buf, name)
            buf.write(struct.pack("<d", value))
        _wstr(buf, rec.gene_description)
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptTableError(f"truncated table while reading {what} at byte {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def string(self, what: str) -> str:
        (n,) = self.unpack("<I", what)
        try:
            return self.take(n, what).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptTableError(f"invalid UTF-8 in {what}") from exc


def loads_table(data: bytes) -> DatasetTable:
    r = _Reader(data)
    if r.take(4, "magic") != TABLE_MAGIC:
        raise CorruptTableError("not a DDTB table (bad magic)")
    version, _ = r.unpack("<HH", "header")
    if version != TABLE_VERSION:
        raise CorruptTableError(f"unsupported DDTB version {version}")
    order = r.string("channel order")
    if order != CHANNEL_ORDER:
        raise CorruptTableError(f"table uses channel order {order!r}, expected {CHANNEL_ORDER!r}")
    (n_src,) = r.unpack("<I", "source count")
    sources = tuple((r.string("source name"), r.string("source digest")) for _ in range(n_src))
    stamp = r.string("timestamp")
    (n,) = r.unpack("<Q", "record count")
    records, labels = [], []
    for i in range(n):
        pid = r.string(f"record {i} pid")
        species = r.string(f"record {i} species")
        lab, tss, length = r.unpack("<BII", f"record {i} header")
        if lab >= len(SPLITS):
            raise CorruptTableError(f"record {i}: bad split code {lab}")
        packed = r.take((length + 3) // 4, f"record {i} bases")
        (has_n,) = r.unpack("<B", f"record {i} N flag")
        bitmap = r.take((length + 7) // 8, f"record {i} N bitmap") if has_n else None
        try:
            seq = _unpack_bases(packed, bitmap, length)
        except SequenceError as exc:
            raise CorruptTableError(f"record {i}: {exc}") from exc
        (n_samp,) = r.unpack("<I", f"record {i} sample count")
        samples = []
        for _ in range(n_samp):
            name = r.string(f"record {i} sample name")
            (val,) = r.unpack("<d", f"record {i} sample value")
            samples.append((name, val))
        desc = r.string(f"record {i} description")
        records.append(PromoterRecord(pid, species, seq, tss, tuple(samples), desc))
        labels.append(SPLITS[lab])
    if r.pos != len(data):
        raise CorruptTableError("trailing bytes after last record")
    return DatasetTable(tuple(records), Provenance(sources, stamp), tuple(labels))


def persist(table: DatasetTable, path) -> None:
    with open(path, "wb") as f:
        f.write(dumps_table(table))


def load(path) -> DatasetTable:
    with open(path, "rb") as f:
        return loads_table(f.read())
