"""Fixed-size page store with encryption applied at the I/O boundary.

A database is a data file plus a log file.

Data file layout (little-endian throughout)::

    page 0          boot record, never encrypted, 8192 bytes
    page 1..N-1     40-byte header + 8152-byte payload

    header = page_id u64 | generation u64 | flags u32 | reserved u32 | mac[16]

With encryption on, the payload is AES-128-CTR under a per-write IV
``SHA-256(db_uuid || page_id || generation)[:16]`` and the MAC is
``HMAC-SHA-256(mac_key, header-without-mac || stored payload)[:16]``.
Ciphertext has the same length as plaintext and the MAC sits inside the
page, so turning encryption on or off never changes a file's length.

Log file layout::

    magic "TDELOG01" | version u32 | flags u32 | size u64 | maxsize u64 |
    filegrowth u64 | record_count u64 | used_bytes u64 | pad to 64 bytes
    then frames: length u32 | stored body | mac[16]
"""

from __future__ import annotations

import hashlib
import hmac
import logging
import os
import struct
import uuid
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import TYPE_CHECKING, Iterator

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from . import errors
from ._binio import Reader

if TYPE_CHECKING:
    from .keyvault import DatabaseEncryptionKey

log = logging.getLogger(__name__)

PAGE_SIZE = 8192
HEADER_SIZE = 40
PAYLOAD_SIZE = PAGE_SIZE - HEADER_SIZE
MAC_SIZE = 16
FLAG_ENCRYPTED = 0x1

BOOT_MAGIC = b"TDEPGSTR"
BOOT_VERSION = 1
LOG_MAGIC = b"TDELOG01"
LOG_VERSION = 1
LOG_HEADER_SIZE = 64
LOG_FRAME_OVERHEAD = 4 + MAC_SIZE

ALGORITHM_IDS = {"AES_128": 1}

_HEADER = struct.Struct("<QQII16s")
_ZERO_MAC = bytes(MAC_SIZE)


class SizeUnit(str, Enum):
    KB = "KB"
    MB = "MB"
    GB = "GB"

    @property
    def multiplier(self) -> int:
        return {"KB": 1 << 10, "MB": 1 << 20, "GB": 1 << 30}[self.value]


@dataclass(frozen=True)
class SizeSpec:
    """A file size as written in DDL; bare numbers are megabytes."""

    value: int
    unit: SizeUnit = SizeUnit.MB

    def __post_init__(self):
        if not isinstance(self.value, int) or self.value <= 0:
            raise errors.InvalidSize(f"size must be a positive integer, got {self.value!r}")
        object.__setattr__(self, "unit", SizeUnit(self.unit))

    @property
    def bytes(self) -> int:
        return self.value * self.unit.multiplier

    def __str__(self) -> str:
        return f"{self.value}{self.unit.value}"


class EncryptionState(IntEnum):
    OFF = 0
    ON = 1


@dataclass(frozen=True)
class PageKeys:
    enc: bytes
    mac: bytes
    log: bytes

    @classmethod
    def derive(cls, dek: bytes) -> "PageKeys":
        return cls(
            enc=hashlib.sha256(dek + b"\x01").digest()[:16],
            mac=hashlib.sha256(dek + b"\x02").digest(),
            log=hashlib.sha256(dek + b"\x03").digest()[:16],
        )


def page_iv(db_uuid: bytes, page_id: int, generation: int) -> bytes:
    return hashlib.sha256(db_uuid + struct.pack("<QQ", page_id, generation)).digest()[:16]


def log_iv(db_uuid: bytes, sequence: int) -> bytes:
    return hashlib.sha256(db_uuid + b"LOG" + struct.pack("<Q", sequence)).digest()[:16]


def aes_ctr(key: bytes, iv: bytes, data: bytes) -> bytes:
    ctx = Cipher(algorithms.AES(key), modes.CTR(iv)).encryptor()
    return ctx.update(data) + ctx.finalize()


def _page_mac(mac_key: bytes, page_id: int, generation: int, flags: int,
              reserved: int, stored: bytes) -> bytes:
    msg = struct.pack("<QQII", page_id, generation, flags, reserved) + stored
    return hmac.new(mac_key, msg, hashlib.sha256).digest()[:MAC_SIZE]


def _log_mac(mac_key: bytes, sequence: int, stored: bytes) -> bytes:
    msg = b"LOGREC" + struct.pack("<QI", sequence, len(stored)) + stored
    return hmac.new(mac_key, msg, hashlib.sha256).digest()[:MAC_SIZE]


# -- boot record -----------------------------------------------------------

@dataclass
class BootRecord:
    """Page 0 of a data file: identity, encryption state and the wrapped DEK.

    The boot record is stored in the clear so a database can be identified
    and its DEK located without any key material.
    """

    db_uuid: bytes
    name: str = ""
    encryption_state: EncryptionState = EncryptionState.OFF
    algorithm_id: int = 0
    certificate_thumbprint: bytes = bytes(20)
    wrapped_dek: bytes = b""
    size: int = 0
    maxsize: int = 0
    filegrowth: int = 0
    version: int = BOOT_VERSION

    @property
    def has_dek(self) -> bool:
        return bool(self.wrapped_dek)

    def to_bytes(self) -> bytes:
        name = self.name.encode("utf-8")
        body = b"".join([
            BOOT_MAGIC,
            struct.pack("<I", self.version),
            self.db_uuid,
            struct.pack("<BBH", int(self.encryption_state), self.algorithm_id, 0),
            self.certificate_thumbprint,
            struct.pack("<QQQ", self.size, self.maxsize, self.filegrowth),
            struct.pack("<H", len(name)), name,
            struct.pack("<I", len(self.wrapped_dek)), self.wrapped_dek,
        ])
        if len(body) > PAGE_SIZE - 32:
            raise ValueError("boot record overflow")
        body += bytes(PAGE_SIZE - 32 - len(body))
        return body + hashlib.sha256(body).digest()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "BootRecord":
        if len(raw) != PAGE_SIZE:
            raise errors.BadBootRecord("boot record has wrong length")
        if raw[:8] != BOOT_MAGIC:
            raise errors.BadBootRecord("bad boot record magic")
        body, digest = raw[:-32], raw[-32:]
        if not hmac.compare_digest(hashlib.sha256(body).digest(), digest):
            raise errors.BadBootRecord("boot record checksum mismatch")
        r = Reader(body, errors.BadBootRecord, offset=8)
        version = r.u32()
        if version != BOOT_VERSION:
            raise errors.BadBootRecord(f"unsupported boot record version {version}")
        db_uuid = r.take(16)
        state, algorithm_id, _ = struct.unpack("<BBH", r.take(4))
        if state not in (0, 1):
            raise errors.BadBootRecord(f"bad encryption state {state}")
        thumbprint = r.take(20)
        size, maxsize, growth = struct.unpack("<QQQ", r.take(24))
        name = r.text()
        wrapped = r.blob()
        return cls(db_uuid=db_uuid, name=name, encryption_state=EncryptionState(state),
                   algorithm_id=algorithm_id, certificate_thumbprint=thumbprint,
                   wrapped_dek=wrapped, size=size, maxsize=maxsize, filegrowth=growth,
                   version=version)


def read_boot_record(path: str | os.PathLike) -> BootRecord:
    """Read page 0 of a data file without opening it for writing."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read(PAGE_SIZE)
    except OSError as exc:
        raise errors.IoError(str(exc)) from exc
    return BootRecord.from_bytes(raw)


# -- raw files -------------------------------------------------------------

def _check_sizes(size: SizeSpec, maxsize: SizeSpec, filegrowth: SizeSpec) -> None:
    if size.bytes > maxsize.bytes:
        raise errors.SizeExceedsMax(f"SIZE {size} exceeds MAXSIZE {maxsize}")


def _open_rw(path: Path):
    try:
        return open(path, "r+b")
    except OSError as exc:
        raise errors.IoError(str(exc)) from exc


class DataFile:
    """Raw page I/O over a data file. Knows nothing about keys."""

    def __init__(self, path: Path, fh, boot: BootRecord):
        self.path = path
        self._fh = fh
        self.boot = boot

    @classmethod
    def open(cls, path: str | os.PathLike) -> "DataFile":
        path = Path(path)
        fh = _open_rw(path)
        try:
            length = os.fstat(fh.fileno()).st_size
            if length < 2 * PAGE_SIZE or length % PAGE_SIZE:
                raise errors.BadBootRecord(f"{path.name}: length {length} is not a page multiple")
            boot = BootRecord.from_bytes(fh.read(PAGE_SIZE))
        except BaseException:
            fh.close()
            raise
        return cls(path, fh, boot)

    @property
    def page_count(self) -> int:
        return os.fstat(self._fh.fileno()).st_size // PAGE_SIZE

    def read_raw(self, page_id: int) -> bytes:
        self._fh.seek(page_id * PAGE_SIZE)
        raw = self._fh.read(PAGE_SIZE)
        if len(raw) != PAGE_SIZE:
            raise errors.PageOutOfRange(f"page {page_id} beyond end of file")
        return raw

    def write_raw(self, page_id: int, raw: bytes) -> None:
        assert len(raw) == PAGE_SIZE
        self._fh.seek(page_id * PAGE_SIZE)
        self._fh.write(raw)

    def write_boot(self) -> None:
        self.write_raw(0, self.boot.to_bytes())
        self._fh.flush()

    def extend_to(self, n_pages: int) -> None:
        self._fh.truncate(n_pages * PAGE_SIZE)

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            self._fh.close()


def create_data_file(path: str | os.PathLike, size: SizeSpec, maxsize: SizeSpec,
                     filegrowth: SizeSpec, *, name: str = "",
                     db_uuid: bytes | None = None) -> DataFile:
    """Create a zero-filled data file of exactly ``size`` bytes."""
    path = Path(path)
    if path.exists():
        raise errors.FileExists(f"{path} already exists")
    _check_sizes(size, maxsize, filegrowth)
    if size.bytes % PAGE_SIZE or size.bytes < 2 * PAGE_SIZE:
        raise errors.InvalidSize(f"data file SIZE {size} must be a multiple of "
                                 f"{PAGE_SIZE} bytes and hold at least two pages")
    if filegrowth.bytes % PAGE_SIZE:
        raise errors.InvalidSize(f"FILEGROWTH {filegrowth} must be a multiple of {PAGE_SIZE} bytes")
    boot = BootRecord(db_uuid=db_uuid or uuid.uuid4().bytes, name=name,
                      size=size.bytes, maxsize=maxsize.bytes, filegrowth=filegrowth.bytes)
    try:
        with open(path, "xb") as fh:
            fh.write(boot.to_bytes())
            fh.truncate(size.bytes)
    except FileExistsError as exc:
        raise errors.FileExists(str(exc)) from exc
    except OSError as exc:
        raise errors.IoError(str(exc)) from exc
    return DataFile.open(path)


@dataclass
class LogHeader:
    flags: int = 0
    size: int = 0
    maxsize: int = 0
    filegrowth: int = 0
    record_count: int = 0
    used_bytes: int = 0

    _STRUCT = struct.Struct("<8sIIQQQQQ")

    def to_bytes(self) -> bytes:
        raw = self._STRUCT.pack(LOG_MAGIC, LOG_VERSION, self.flags, self.size, self.maxsize,
                                self.filegrowth, self.record_count, self.used_bytes)
        return raw + bytes(LOG_HEADER_SIZE - len(raw))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "LogHeader":
        if len(raw) < LOG_HEADER_SIZE or raw[:8] != LOG_MAGIC:
            raise errors.LogCorrupt("bad log file magic")
        magic, version, flags, size, maxsize, growth, count, used = \
            cls._STRUCT.unpack(raw[:cls._STRUCT.size])
        if version != LOG_VERSION:
            raise errors.LogCorrupt(f"unsupported log version {version}")
        return cls(flags, size, maxsize, growth, count, used)

    @property
    def encrypted(self) -> bool:
        return bool(self.flags & FLAG_ENCRYPTED)


class LogFile:
    """Append-only framed record file. Keeps an in-memory offset index."""

    def __init__(self, path: Path, fh, header: LogHeader):
        self.path = path
        self._fh = fh
        self.header = header
        self._offsets: list[int] = []
        pos = LOG_HEADER_SIZE
        end = LOG_HEADER_SIZE + header.used_bytes
        for _ in range(header.record_count):
            if pos + 4 > end:
                raise errors.LogCorrupt("log frame index overruns used region")
            fh.seek(pos)
            (length,) = struct.unpack("<I", fh.read(4))
            self._offsets.append(pos)
            pos += LOG_FRAME_OVERHEAD + length
        if pos != end:
            raise errors.LogCorrupt("log used_bytes does not match frames")

    @classmethod
    def open(cls, path: str | os.PathLike) -> "LogFile":
        path = Path(path)
        fh = _open_rw(path)
        try:
            header = LogHeader.from_bytes(fh.read(LOG_HEADER_SIZE))
            return cls(path, fh, header)
        except BaseException:
            fh.close()
            raise

    @property
    def length(self) -> int:
        return os.fstat(self._fh.fileno()).st_size

    @property
    def record_count(self) -> int:
        return self.header.record_count

    def read_frame(self, sequence: int) -> tuple[bytes, bytes]:
        """Return ``(stored_body, mac)`` for a 1-based sequence number."""
        if not 1 <= sequence <= len(self._offsets):
            raise errors.LogCorrupt(f"no log record {sequence}")
        self._fh.seek(self._offsets[sequence - 1])
        (length,) = struct.unpack("<I", self._fh.read(4))
        stored = self._fh.read(length)
        mac = self._fh.read(MAC_SIZE)
        return stored, mac

    def rewrite_frame(self, sequence: int, stored: bytes, mac: bytes) -> None:
        pos = self._offsets[sequence - 1]
        self._fh.seek(pos + 4)
        self._fh.write(stored + mac)

    def append_frame(self, stored: bytes, mac: bytes) -> int:
        frame = struct.pack("<I", len(stored)) + stored + mac
        pos = LOG_HEADER_SIZE + self.header.used_bytes
        needed = pos + len(frame)
        length = self.length
        if needed > length:
            new_length = length
            while new_length < needed:
                if self.header.filegrowth <= 0:
                    raise errors.LogFull("log cannot grow")
                new_length += self.header.filegrowth
            if new_length > self.header.maxsize:
                raise errors.LogFull(f"log growth to {new_length} bytes exceeds MAXSIZE")
            self._fh.truncate(new_length)
        self._fh.seek(pos)
        self._fh.write(frame)
        self._offsets.append(pos)
        self.header.record_count += 1
        self.header.used_bytes += len(frame)
        self.write_header()
        return self.header.record_count

    def used_region(self) -> bytes:
        self._fh.seek(LOG_HEADER_SIZE)
        return self._fh.read(self.header.used_bytes)

    def write_header(self) -> None:
        self._fh.seek(0)
        self._fh.write(self.header.to_bytes())
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            self._fh.close()


def create_log_file(path: str | os.PathLike, size: SizeSpec, maxsize: SizeSpec,
                    filegrowth: SizeSpec) -> LogFile:
    path = Path(path)
    if path.exists():
        raise errors.FileExists(f"{path} already exists")
    _check_sizes(size, maxsize, filegrowth)
    if size.bytes < LOG_HEADER_SIZE:
        raise errors.InvalidSize(f"log SIZE {size} is smaller than the log header")
    header = LogHeader(size=size.bytes, maxsize=maxsize.bytes, filegrowth=filegrowth.bytes)
    try:
        with open(path, "xb") as fh:
            fh.write(header.to_bytes())
            fh.truncate(size.bytes)
    except FileExistsError as exc:
        raise errors.FileExists(str(exc)) from exc
    except OSError as exc:
        raise errors.IoError(str(exc)) from exc
    return LogFile.open(path)


# -- database --------------------------------------------------------------

@dataclass
class ScanReport:
    pages: int = 0
    log_records: int = 0
    warning: str | None = None


@dataclass
class Database:
    """A data file and its log, with transparent page and record encryption.

    Callers always see plaintext from :meth:`read_page` and
    :meth:`read_log_record`; whether the bytes on disk are encrypted is
    governed solely by the boot record's encryption state.
    """

    data: DataFile
    log: LogFile
    _keys: PageKeys | None = field(default=None, repr=False)

    @classmethod
    def create(cls, name: str, data_path, log_path,
               data_size: SizeSpec, data_maxsize: SizeSpec, data_growth: SizeSpec,
               log_size: SizeSpec, log_maxsize: SizeSpec, log_growth: SizeSpec) -> "Database":
        # Validate the log before touching the disk so bad sizes leave nothing behind.
        _check_sizes(log_size, log_maxsize, log_growth)
        if Path(log_path).exists():
            raise errors.FileExists(f"{log_path} already exists")
        data = create_data_file(data_path, data_size, data_maxsize, data_growth, name=name)
        try:
            log_file = create_log_file(log_path, log_size, log_maxsize, log_growth)
        except BaseException:
            data.close()
            os.unlink(data.path)
            raise
        return cls(data, log_file)

    @classmethod
    def open(cls, data_path, log_path) -> "Database":
        data = DataFile.open(data_path)
        try:
            log_file = LogFile.open(log_path)
        except BaseException:
            data.close()
            raise
        return cls(data, log_file)

    def flush(self) -> None:
        self.data.flush()
        self.log.write_header()

    def close(self) -> None:
        self._keys = None
        self.data.close()
        self.log.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- state -------------------------------------------------------------

    @property
    def boot(self) -> BootRecord:
        return self.data.boot

    @property
    def name(self) -> str:
        return self.boot.name

    @property
    def encryption_on(self) -> bool:
        return self.boot.encryption_state == EncryptionState.ON

    @property
    def page_count(self) -> int:
        return self.data.page_count

    @property
    def has_key(self) -> bool:
        return self._keys is not None

    def attach_key(self, dek: "DatabaseEncryptionKey") -> None:
        self._keys = PageKeys.derive(dek.key_bytes)

    def install_dek(self, algorithm_id: int, thumbprint: bytes, wrapped_dek: bytes) -> None:
        """Record a wrapped DEK in the boot record."""
        if self.boot.has_dek:
            raise errors.DekAlreadyExists(f"database {self.name!r} already has an encryption key")
        self.boot.algorithm_id = algorithm_id
        self.boot.certificate_thumbprint = thumbprint
        self.boot.wrapped_dek = wrapped_dek
        self.data.write_boot()

    def _require_keys(self) -> PageKeys:
        if self._keys is None:
            raise errors.EncryptionKeyUnavailable(
                f"database {self.name!r} is encrypted and its key is not open")
        return self._keys

    # -- pages -------------------------------------------------------------

    def _seal_page(self, page_id: int, generation: int, payload: bytes, encrypt: bool) -> bytes:
        if encrypt:
            keys = self._require_keys()
            stored = aes_ctr(keys.enc, page_iv(self.boot.db_uuid, page_id, generation), payload)
            mac = _page_mac(keys.mac, page_id, generation, FLAG_ENCRYPTED, 0, stored)
            return _HEADER.pack(page_id, generation, FLAG_ENCRYPTED, 0, mac) + stored
        return _HEADER.pack(page_id, generation, 0, 0, _ZERO_MAC) + payload

    def _open_page(self, page_id: int, raw: bytes, encrypted: bool) -> tuple[int, bytes]:
        """Validate a raw page and return ``(generation, plaintext payload)``."""
        stored_id, generation, flags, reserved, mac = _HEADER.unpack(raw[:HEADER_SIZE])
        stored = raw[HEADER_SIZE:]
        if encrypted:
            keys = self._require_keys()
            if flags != FLAG_ENCRYPTED or reserved != 0 or stored_id != page_id:
                raise errors.PageCorrupt(f"page {page_id}: bad header")
            expected = _page_mac(keys.mac, stored_id, generation, flags, reserved, stored)
            if not hmac.compare_digest(expected, mac):
                raise errors.PageCorrupt(f"page {page_id}: MAC mismatch")
            return generation, aes_ctr(keys.enc, page_iv(self.boot.db_uuid, page_id, generation), stored)
        if flags != 0 or reserved != 0 or mac != _ZERO_MAC or stored_id not in (0, page_id):
            raise errors.PageCorrupt(f"page {page_id}: bad header")
        return generation, stored

    def _check_page_id(self, page_id: int) -> None:
        if page_id < 1:
            raise errors.PageOutOfRange(f"page {page_id} is reserved or invalid")

    def _grow_for(self, page_id: int) -> None:
        boot = self.boot
        current = self.page_count * PAGE_SIZE
        target = current
        while target < (page_id + 1) * PAGE_SIZE:
            if boot.filegrowth <= 0:
                raise errors.DatabaseFull("data file cannot grow")
            target += boot.filegrowth
        if target > boot.maxsize:
            raise errors.DatabaseFull(
                f"growing to {target} bytes would exceed MAXSIZE {boot.maxsize}")
        first_new = self.page_count
        self.data.extend_to(target // PAGE_SIZE)
        if self.encryption_on:
            # New pages must look like every other page of an encrypted file.
            zero = bytes(PAYLOAD_SIZE)
            for pid in range(first_new, target // PAGE_SIZE):
                self.data.write_raw(pid, self._seal_page(pid, 1, zero, True))

    def write_page(self, page_id: int, payload: bytes) -> None:
        self._check_page_id(page_id)
        if len(payload) != PAYLOAD_SIZE:
            raise ValueError(f"payload must be exactly {PAYLOAD_SIZE} bytes, got {len(payload)}")
        if self.encryption_on:
            self._require_keys()
        if page_id >= self.page_count:
            self._grow_for(page_id)
        raw = self.data.read_raw(page_id)
        generation = _HEADER.unpack(raw[:HEADER_SIZE])[1] + 1
        self.data.write_raw(page_id, self._seal_page(page_id, generation, bytes(payload),
                                                     self.encryption_on))

    def read_page(self, page_id: int) -> bytes:
        self._check_page_id(page_id)
        if page_id >= self.page_count:
            raise errors.PageOutOfRange(f"page {page_id} not allocated")
        return self._open_page(page_id, self.data.read_raw(page_id), self.encryption_on)[1]

    def read_raw_page(self, page_id: int) -> bytes:
        """Return the on-disk bytes of a page, without decryption."""
        return self.data.read_raw(page_id)

    # -- log ---------------------------------------------------------------

    def _seal_log(self, sequence: int, body: bytes, encrypt: bool) -> tuple[bytes, bytes]:
        if encrypt:
            keys = self._require_keys()
            stored = aes_ctr(keys.log, log_iv(self.boot.db_uuid, sequence), body)
            return stored, _log_mac(keys.mac, sequence, stored)
        return body, _ZERO_MAC

    def _open_log(self, sequence: int, stored: bytes, mac: bytes, encrypted: bool) -> bytes:
        if encrypted:
            keys = self._require_keys()
            if not hmac.compare_digest(_log_mac(keys.mac, sequence, stored), mac):
                raise errors.LogCorrupt(f"log record {sequence}: MAC mismatch")
            return aes_ctr(keys.log, log_iv(self.boot.db_uuid, sequence), stored)
        if mac != _ZERO_MAC:
            raise errors.LogCorrupt(f"log record {sequence}: unexpected MAC on plaintext record")
        return stored

    def append_log_record(self, body: bytes) -> int:
        """Append a record and return its sequence number (starting at 1)."""
        encrypt = self.log.header.encrypted
        stored, mac = self._seal_log(self.log.record_count + 1, bytes(body), encrypt)
        return self.log.append_frame(stored, mac)

    def read_log_record(self, sequence: int) -> bytes:
        stored, mac = self.log.read_frame(sequence)
        return self._open_log(sequence, stored, mac, self.log.header.encrypted)

    def log_records(self) -> Iterator[tuple[int, bytes]]:
        for seq in range(1, self.log.record_count + 1):
            yield seq, self.read_log_record(seq)

    # -- encryption scans --------------------------------------------------

    def _convert(self, encrypt: bool) -> ScanReport:
        was_encrypted = self.encryption_on
        report = ScanReport()
        for pid in range(1, self.page_count):
            generation, payload = self._open_page(pid, self.data.read_raw(pid), was_encrypted)
            self.data.write_raw(pid, self._seal_page(pid, generation + 1, payload, encrypt))
            report.pages += 1
        self.data.flush()
        log_encrypted = self.log.header.encrypted
        for seq in range(1, self.log.record_count + 1):
            stored, mac = self.log.read_frame(seq)
            body = self._open_log(seq, stored, mac, log_encrypted)
            self.log.rewrite_frame(seq, *self._seal_log(seq, body, encrypt))
            report.log_records += 1
        self.log.header.flags = FLAG_ENCRYPTED if encrypt else 0
        self.log.write_header()
        self.boot.encryption_state = EncryptionState.ON if encrypt else EncryptionState.OFF
        self.data.write_boot()
        return report

    def set_encryption_on(self, dek: "DatabaseEncryptionKey | None" = None) -> ScanReport:
        """Encrypt every data page and log record in place.

        Running it on an already encrypted database is a logged no-op.
        """
        if not self.boot.has_dek:
            raise errors.NoDekCreated(f"database {self.name!r} has no database encryption key")
        if self.encryption_on:
            log.warning("database %r: encryption is already on", self.name)
            return ScanReport(warning="AlreadyOn")
        if dek is not None:
            self.attach_key(dek)
        self._require_keys()
        return self._convert(encrypt=True)

    def set_encryption_off(self) -> ScanReport:
        """Decrypt everything in place. The wrapped DEK stays in the boot record."""
        if not self.encryption_on:
            raise errors.AlreadyOff(f"database {self.name!r} is not encrypted")
        self._require_keys()
        return self._convert(encrypt=False)
