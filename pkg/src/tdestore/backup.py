"""Backup, restore and attach of database files.

Backups copy pages and log frames exactly as they sit on disk. Nothing is
decrypted, so an encrypted database produces an encrypted image, and
restoring that image elsewhere needs the certificate as well.

``.tdebak`` layout (little-endian)::

    magic "TDEBKUP1" | version u32
    db name, data file name, log file name      (u16 length + utf-8 each)
    boot record                                 (8192 bytes, verbatim)
    data page count u64 | pages                 (count x 8192 bytes, verbatim)
    log header                                  (64 bytes, verbatim)
    log file length u64 | used length u64 | used log region (verbatim frames)
    SHA-256 digest of everything above          (final 32 bytes)
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from . import _binio as bio
from . import errors
from .pager import LOG_HEADER_SIZE, PAGE_SIZE, BootRecord, LogHeader, read_boot_record

if TYPE_CHECKING:
    from .engine import CatalogEntry, ServerInstance

IMAGE_MAGIC = b"TDEBKUP1"
IMAGE_VERSION = 1
DIGEST_SIZE = 32


@dataclass
class BackupImage:
    db_name: str
    data_file_name: str
    log_file_name: str
    boot_raw: bytes
    pages: bytes
    log_header_raw: bytes
    log_length: int
    log_region: bytes
    version: int = IMAGE_VERSION

    @property
    def boot(self) -> BootRecord:
        return BootRecord.from_bytes(self.boot_raw)

    @property
    def page_count(self) -> int:
        return len(self.pages) // PAGE_SIZE

    def page_section(self) -> bytes:
        return self.boot_raw + self.pages

    def body(self) -> bytes:
        return b"".join([
            IMAGE_MAGIC, bio.u32(self.version),
            bio.text(self.db_name), bio.text(self.data_file_name), bio.text(self.log_file_name),
            self.boot_raw, bio.u64(self.page_count), self.pages,
            self.log_header_raw, bio.u64(self.log_length),
            bio.u64(len(self.log_region)), self.log_region,
        ])

    def to_bytes(self) -> bytes:
        body = self.body()
        return body + hashlib.sha256(body).digest()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "BackupImage":
        if len(raw) < len(IMAGE_MAGIC) + DIGEST_SIZE:
            raise errors.CorruptImage("backup image is truncated")
        body, digest = raw[:-DIGEST_SIZE], raw[-DIGEST_SIZE:]
        if not hmac.compare_digest(hashlib.sha256(body).digest(), digest):
            raise errors.CorruptImage("backup image digest mismatch")
        r = bio.Reader(body, errors.CorruptImage)
        if r.take(len(IMAGE_MAGIC)) != IMAGE_MAGIC:
            raise errors.CorruptImage("bad backup image magic")
        version = r.u32()
        if version != IMAGE_VERSION:
            raise errors.CorruptImage(f"unsupported image version {version}")
        names = r.text(), r.text(), r.text()
        boot_raw = r.take(PAGE_SIZE)
        pages = r.take(r.u64() * PAGE_SIZE)
        log_header = r.take(LOG_HEADER_SIZE)
        log_length = r.u64()
        region = r.take(r.u64())
        if not r.at_end():
            raise errors.CorruptImage("trailing bytes in backup image")
        try:
            BootRecord.from_bytes(boot_raw)
            LogHeader.from_bytes(log_header)
        except (errors.BadBootRecord, errors.LogCorrupt) as exc:
            raise errors.CorruptImage(str(exc)) from exc
        if log_length < LOG_HEADER_SIZE + len(region):
            raise errors.CorruptImage("log length smaller than its contents")
        return cls(*names, boot_raw, pages, log_header, log_length, region, version)


@dataclass
class BackupSummary:
    db_name: str
    path: Path
    pages: int
    log_bytes: int
    digest: bytes


def read_image(path: str | Path) -> BackupImage:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise errors.IoError(str(exc)) from exc
    return BackupImage.from_bytes(raw)


def backup_database(instance: "ServerInstance", db_name: str, to_file: str | Path) -> BackupSummary:
    """Image a database's files verbatim into ``to_file``."""
    entry = instance.entry(db_name)
    db = instance._dbs.get(entry.name.casefold())
    if db is not None:
        db.flush()
    data_path = instance._path(entry.data_file)
    log_path = instance._path(entry.log_file)
    try:
        data_raw = data_path.read_bytes()
        with open(log_path, "rb") as fh:
            log_header_raw = fh.read(LOG_HEADER_SIZE)
            header = LogHeader.from_bytes(log_header_raw)
            region = fh.read(header.used_bytes)
            log_length = fh.seek(0, 2)
    except OSError as exc:
        raise errors.IoError(str(exc)) from exc
    image = BackupImage(entry.name, data_path.name, log_path.name, data_raw[:PAGE_SIZE],
                        data_raw[PAGE_SIZE:], log_header_raw, log_length, region)
    raw = image.to_bytes()
    try:
        bio.atomic_write(Path(to_file), raw)
    except OSError as exc:
        raise errors.IoError(str(exc)) from exc
    return BackupSummary(entry.name, Path(to_file), image.page_count, len(region), raw[-DIGEST_SIZE:])


def restore_database(instance: "ServerInstance", from_file: str | Path) -> "CatalogEntry":
    """Materialize an image into the instance directory and catalog it.

    An encrypted image restores even when its certificate is missing; the
    entry is then inaccessible until the certificate is restored.
    """
    image = read_image(from_file)
    if image.db_name.casefold() in instance.catalog:
        raise errors.DuplicateDatabaseName(f"database {image.db_name!r} already exists")
    data_path = instance.data_dir / Path(image.data_file_name).name
    log_path = instance.data_dir / Path(image.log_file_name).name
    for p in (data_path, log_path):
        if p.exists():
            raise errors.FileExists(f"{p} already exists")
    try:
        data_path.write_bytes(image.boot_raw + image.pages)
        with open(log_path, "wb") as fh:
            fh.write(image.log_header_raw + image.log_region)
            fh.truncate(image.log_length)
    except OSError as exc:
        raise errors.IoError(str(exc)) from exc
    return instance.register(data_path, log_path, image.db_name)


def attach_database(instance: "ServerInstance", data_file: str | Path,
                    log_file: str | Path) -> "CatalogEntry":
    """Catalog existing database files in place."""
    data_file, log_file = Path(data_file), Path(log_file)
    boot = read_boot_record(data_file)
    if not log_file.exists():
        raise errors.IoError(f"{log_file} does not exist")
    return instance.register(data_file, log_file, boot.name)
