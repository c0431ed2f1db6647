"""Server instance: key store, database catalog, session context, execution.

An instance owns one data directory::

    <data_dir>/instance.lock       advisory lock, one live instance per directory
    <data_dir>/master.keystore     SMK, DMK and certificates
    <data_dir>/catalog.manifest    attached databases
    <data_dir>/*.mdf, *.ldf        database files

Opening an instance never fails because of one bad database. Each
encrypted database gets a DEK unwrap attempt; a failure marks the entry
inaccessible and records the error code.
"""

from __future__ import annotations

import fcntl
import logging
import os
import re
from dataclasses import asdict, dataclass
from pathlib import Path

from . import _binio as bio
from . import backup, errors
from . import tdeparser as ast
from .keyvault import KeyStore
from .pager import Database

log = logging.getLogger(__name__)

LOCK_FILE = "instance.lock"
CATALOG_FILE = "catalog.manifest"
CATALOG_MAGIC = b"TDECATL1"
CATALOG_VERSION = 1
MASTER = "master"


@dataclass
class CatalogEntry:
    name: str
    data_file: str
    log_file: str
    state: str = "closed"
    accessible: bool = False
    last_error: str | None = None

    def _encode(self) -> bytes:
        return (bio.text(self.name) + bio.text(self.data_file) + bio.text(self.log_file)
                + bio.u8(int(self.accessible)) + bio.text(self.last_error or ""))

    @classmethod
    def _decode(cls, body: bytes) -> "CatalogEntry":
        r = bio.Reader(body, errors.IoError)
        entry = cls(name=r.text(), data_file=r.text(), log_file=r.text())
        entry.accessible = bool(r.u8())
        entry.last_error = r.text() or None
        return entry


@dataclass
class ExecutionResult:
    statement: str
    line: int
    ok: bool
    message: str
    error: str | None = None
    warning: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _basename(path_text: str) -> str:
    name = re.split(r"[\\/]", path_text.strip())[-1].strip()
    if not name or name in (".", ".."):
        raise errors.IoError(f"no file name in path {path_text!r}")
    return name


class ServerInstance:
    """A running server. Use :meth:`open` (or :func:`open_instance`)."""

    def __init__(self, data_dir: Path, machine_secret: bytes, keystore: KeyStore, lock_fh):
        self.data_dir = data_dir
        self.keystore = keystore
        self.session = MASTER
        self.catalog: dict[str, CatalogEntry] = {}
        self._machine_secret = machine_secret
        self._lock_fh = lock_fh
        self._dbs: dict[str, Database] = {}

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def open(cls, data_dir: str | os.PathLike, machine_secret: bytes) -> "ServerInstance":
        data_dir = Path(data_dir).absolute()
        try:
            data_dir.mkdir(parents=True, exist_ok=True)
            lock_fh = open(data_dir / LOCK_FILE, "a+b")
        except OSError as exc:
            raise errors.IoError(str(exc)) from exc
        try:
            fcntl.flock(lock_fh.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            lock_fh.close()
            raise errors.LockHeld(f"another instance holds {data_dir / LOCK_FILE}") from None
        try:
            keystore = KeyStore.open(data_dir / KeyStore.FILENAME, machine_secret)
            instance = cls(data_dir, machine_secret, keystore, lock_fh)
            instance._load_catalog()
        except BaseException:
            lock_fh.close()
            raise
        for key in list(instance.catalog):
            instance._evaluate(key)
        instance._save_catalog()
        return instance

    def close(self) -> None:
        for db in self._dbs.values():
            db.close()
        self._dbs.clear()
        self.keystore = None
        if self._lock_fh is not None and not self._lock_fh.closed:
            fcntl.flock(self._lock_fh.fileno(), fcntl.LOCK_UN)
            self._lock_fh.close()

    def restart(self) -> "ServerInstance":
        """Close, dropping all in-memory key material, and reopen."""
        secret = self._machine_secret
        self.close()
        return ServerInstance.open(self.data_dir, secret)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- catalog -----------------------------------------------------------

    def _load_catalog(self) -> None:
        path = self.data_dir / CATALOG_FILE
        if not path.exists():
            return
        r = bio.Reader(path.read_bytes(), errors.IoError)
        if r.take(8) != CATALOG_MAGIC or r.u32() != CATALOG_VERSION:
            raise errors.IoError(f"{path} is not a catalog manifest")
        for rtype, body in r.records():
            entry = CatalogEntry._decode(body)
            self.catalog[entry.name.casefold()] = entry

    def _save_catalog(self) -> None:
        parts = [CATALOG_MAGIC, bio.u32(CATALOG_VERSION)]
        parts += [bio.record(1, e._encode()) for e in self.catalog.values()]
        bio.atomic_write(self.data_dir / CATALOG_FILE, b"".join(parts))

    def _path(self, stored: str) -> Path:
        p = Path(stored)
        return p if p.is_absolute() else self.data_dir / p

    def _stored(self, path: Path) -> str:
        path = Path(path).absolute()
        try:
            return str(path.relative_to(self.data_dir))
        except ValueError:
            return str(path)

    def local_path(self, path_text: str) -> Path:
        """Map a path written in DDL into the data directory by basename."""
        return self.data_dir / _basename(path_text)

    def entry(self, name: str) -> CatalogEntry:
        try:
            return self.catalog[name.casefold()]
        except KeyError:
            raise errors.DatabaseNotFound(f"database {name!r} does not exist") from None

    def _evaluate(self, key: str, certificate_password: str | None = None) -> CatalogEntry:
        entry = self.catalog[key]
        db = self._dbs.get(key)
        try:
            if db is None:
                db = Database.open(self._path(entry.data_file), self._path(entry.log_file))
                self._dbs[key] = db
            entry.state = "open"
            if db.encryption_on and not db.has_key:
                db.attach_key(self.keystore.unwrap_dek(db.boot, certificate_password))
            entry.accessible, entry.last_error = True, None
        except errors.TDEError as exc:
            entry.accessible, entry.last_error = False, exc.code
            log.warning("database %r is inaccessible: %s", entry.name, exc.code)
        return entry

    def register(self, data_path: Path, log_path: Path, name: str) -> CatalogEntry:
        key = name.casefold()
        if key in self.catalog or key == MASTER:
            raise errors.DuplicateDatabaseName(f"database {name!r} already exists")
        self.catalog[key] = CatalogEntry(name, self._stored(data_path), self._stored(log_path))
        entry = self._evaluate(key)
        self._save_catalog()
        return entry

    def drop_database(self, name: str, delete_files: bool = True) -> None:
        entry = self.entry(name)
        key = name.casefold()
        db = self._dbs.pop(key, None)
        if db is not None:
            db.close()
        del self.catalog[key]
        if self.session.casefold() == key:
            self.session = MASTER
        if delete_files:
            for stored in (entry.data_file, entry.log_file):
                self._path(stored).unlink(missing_ok=True)
        self._save_catalog()

    def database(self, name: str) -> Database:
        """Return an accessible database, raising its recorded error otherwise."""
        entry = self.entry(name)
        if not entry.accessible:
            raise errors.DatabaseInaccessible(
                f"database {entry.name!r} is inaccessible ({entry.last_error})")
        return self._dbs[name.casefold()]

    def open_database(self, name: str, certificate_password: str | None = None) -> CatalogEntry:
        """Retry opening a database, e.g. with a password-protected certificate."""
        entry = self._evaluate(self.entry(name).name.casefold(), certificate_password)
        self._save_catalog()
        return entry

    def status(self) -> list[dict]:
        rows = []
        for key, entry in self.catalog.items():
            db = self._dbs.get(key)
            state = "Unknown" if db is None else ("On" if db.encryption_on else "Off")
            rows.append({"name": entry.name, "encryption_state": state,
                         "accessible": entry.accessible, "last_error": entry.last_error})
        return rows

    # -- execution ---------------------------------------------------------

    def execute_statement(self, stmt: ast.Statement) -> ExecutionResult:
        """Run one statement. Errors are reported in the result, never raised."""
        handler = getattr(self, f"_exec_{stmt.kind}")
        try:
            outcome = handler(stmt)
        except errors.TDEError as exc:
            return ExecutionResult(stmt.kind, stmt.line, False, str(exc), error=exc.code)
        except OSError as exc:
            return ExecutionResult(stmt.kind, stmt.line, False, str(exc), error="IoError")
        finally:
            for db in self._dbs.values():
                db.data.flush()
        message, warning = outcome if isinstance(outcome, tuple) else (outcome, None)
        return ExecutionResult(stmt.kind, stmt.line, True, message, warning=warning)

    def execute_batch(self, batch: ast.Batch) -> list[ExecutionResult]:
        results = []
        for stmt in batch.statements:
            result = self.execute_statement(stmt)
            results.append(result)
            if not result.ok:
                break
        return results

    def execute_script(self, script: str) -> list[ExecutionResult]:
        """Parse the whole script, then run it batch by batch.

        A syntax error anywhere raises before anything runs. A failing
        statement ends its batch; later batches still run.
        """
        results = []
        for batch in ast.parse_script(script):
            results.extend(self.execute_batch(batch))
        return results

    def _require_master(self, what: str) -> None:
        if self.session.casefold() != MASTER:
            raise errors.ContextError(f"{what} must run in the master database")

    def _exec_Use(self, stmt: ast.Use):
        if stmt.db.casefold() == MASTER:
            self.session = MASTER
        else:
            self.session = self.entry(stmt.db).name
        return f"Changed database context to '{self.session}'."

    def _exec_CreateDatabase(self, stmt: ast.CreateDatabase):
        if stmt.name.casefold() in self.catalog or stmt.name.casefold() == MASTER:
            raise errors.DuplicateDatabaseName(f"database {stmt.name!r} already exists")
        data_path = self.local_path(stmt.data_file.filename)
        log_path = self.local_path(stmt.log_file.filename)
        if data_path == log_path:
            raise errors.FileExists("data and log files must differ")
        d, lg = stmt.data_file, stmt.log_file
        db = Database.create(stmt.name, data_path, log_path, d.size, d.maxsize, d.filegrowth,
                             lg.size, lg.maxsize, lg.filegrowth)
        key = stmt.name.casefold()
        self._dbs[key] = db
        self.catalog[key] = CatalogEntry(stmt.name, self._stored(data_path), self._stored(log_path),
                                         state="open", accessible=True)
        self._save_catalog()
        return f"Database '{stmt.name}' created."

    def _exec_CreateMasterKey(self, stmt: ast.CreateMasterKey):
        self._require_master("CREATE MASTER KEY")
        self.keystore.create_database_master_key(stmt.password)
        return "Database master key created."

    def _exec_CreateCertificate(self, stmt: ast.CreateCertificate):
        self._require_master("CREATE CERTIFICATE")
        cert = self.keystore.create_certificate(stmt.name, stmt.subject)
        return f"Certificate '{cert.name}' created."

    def _exec_CreateDatabaseEncryptionKey(self, stmt: ast.CreateDatabaseEncryptionKey):
        if self.session.casefold() == MASTER:
            raise errors.ContextError("CREATE DATABASE ENCRYPTION KEY needs a user database context")
        db = self.database(self.session)
        dek = self.keystore.create_database_encryption_key(stmt.algorithm, stmt.certificate, db)
        db.attach_key(dek)
        return f"Database encryption key created for '{db.name}'."

    def _exec_AlterDatabaseSetEncryption(self, stmt: ast.AlterDatabaseSetEncryption):
        entry = self.entry(stmt.db)
        key = entry.name.casefold()
        db = self._dbs.get(key)
        if db is None:
            raise errors.DatabaseInaccessible(f"database {entry.name!r} is inaccessible "
                                              f"({entry.last_error})")
        if stmt.on:
            if not db.boot.has_dek:
                raise errors.NoDekCreated(f"database {entry.name!r} has no encryption key")
            if db.encryption_on:
                db.set_encryption_on()
                return f"Encryption is already on for '{entry.name}'.", "AlreadyOn"
        elif not db.encryption_on:
            raise errors.AlreadyOff(f"database {entry.name!r} is not encrypted")
        if not db.has_key:
            db.attach_key(self.keystore.unwrap_dek(db.boot))
        report = db.set_encryption_on() if stmt.on else db.set_encryption_off()
        entry.accessible, entry.last_error = True, None
        self._save_catalog()
        return (f"Encryption {'enabled' if stmt.on else 'disabled'} for '{entry.name}': "
                f"{report.pages} pages, {report.log_records} log records converted.")

    def _exec_AlterCertificatePassword(self, stmt: ast.AlterCertificatePassword):
        self._require_master("ALTER CERTIFICATE")
        self.keystore.alter_certificate_private_key_password(stmt.name, stmt.password)
        return f"Certificate '{stmt.name}' is now password protected."

    def _exec_BackupCertificate(self, stmt: ast.BackupCertificate):
        self._require_master("BACKUP CERTIFICATE")
        self.keystore.backup_certificate(stmt.name, self.local_path(stmt.cert_file),
                                         self.local_path(stmt.pk_file), stmt.password)
        return f"Certificate '{stmt.name}' backed up."

    def _exec_RestoreCertificate(self, stmt: ast.RestoreCertificate):
        self._require_master("RESTORE CERTIFICATE")
        cert = self.keystore.restore_certificate(self.local_path(stmt.cert_file),
                                                 self.local_path(stmt.pk_file), stmt.password)
        self.reevaluate()
        return f"Certificate '{cert.name}' restored."

    def _exec_BackupDatabase(self, stmt: ast.BackupDatabase):
        summary = backup.backup_database(self, stmt.db, self.local_path(stmt.to_file))
        return f"Backed up '{summary.db_name}': {summary.pages} pages, {summary.log_bytes} log bytes."

    def _exec_RestoreDatabase(self, stmt: ast.RestoreDatabase):
        entry = backup.restore_database(self, self.local_path(stmt.from_file))
        return _restored_message("Restored", entry)

    def _exec_AttachDatabase(self, stmt: ast.AttachDatabase):
        entry = backup.attach_database(self, self.local_path(stmt.data_file),
                                       self.local_path(stmt.log_file))
        return _restored_message("Attached", entry)

    def reevaluate(self) -> None:
        """Retry every inaccessible database, e.g. after a certificate restore."""
        for key, entry in self.catalog.items():
            if not entry.accessible:
                self._evaluate(key)
        self._save_catalog()


def _restored_message(verb: str, entry: CatalogEntry):
    if entry.accessible:
        return f"{verb} database '{entry.name}'."
    return (f"{verb} database '{entry.name}' (inaccessible: {entry.last_error}).",
            entry.last_error)


def open_instance(data_dir: str | os.PathLike, machine_secret: bytes) -> ServerInstance:
    return ServerInstance.open(data_dir, machine_secret)


def execute_statement(instance: ServerInstance, stmt: ast.Statement) -> ExecutionResult:
    return instance.execute_statement(stmt)


def restart_instance(instance: ServerInstance) -> ServerInstance:
    return instance.restart()
