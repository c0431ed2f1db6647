"""Exception hierarchy shared by every layer of the store.

Each exception carries a stable ``code`` (the class name unless overridden).
The engine and CLI report that code rather than the Python type, so scripts
and JSON consumers can match on it.
"""

from __future__ import annotations


class TDEError(Exception):
    """Base class for all store errors."""

    code: str = "TDEError"

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if "code" not in cls.__dict__:
            cls.code = cls.__name__


# -- key hierarchy ---------------------------------------------------------

class AlreadyInitialized(TDEError):
    pass


class NotInitialized(TDEError):
    pass


class WeakMachineSecret(TDEError):
    pass


class MachineSecretMismatch(TDEError):
    pass


class NoMachineSecret(TDEError):
    pass


class NoServiceMasterKey(TDEError):
    pass


class DmkAlreadyExists(TDEError):
    pass


class EmptyPassword(TDEError):
    pass


class NoDatabaseMasterKey(TDEError):
    pass


class DecryptFailed(TDEError):
    pass


class DuplicateCertificateName(TDEError):
    pass


class CertificateNotFound(TDEError):
    pass


class DekAlreadyExists(TDEError):
    pass


class UnsupportedAlgorithm(TDEError):
    pass


class PrivateKeyLocked(TDEError):
    pass


class BadPassword(TDEError):
    pass


class CorruptBackupFile(TDEError):
    pass


class CorruptKeyStore(TDEError):
    pass


# -- pages and log ---------------------------------------------------------

class FileExists(TDEError):
    pass


class SizeExceedsMax(TDEError):
    pass


class InvalidSize(TDEError):
    pass


class DatabaseFull(TDEError):
    pass


class PageOutOfRange(TDEError):
    pass


class EncryptionKeyUnavailable(TDEError):
    pass


class PageCorrupt(TDEError):
    pass


class LogCorrupt(TDEError):
    pass


class NoDekCreated(TDEError):
    pass


class AlreadyOff(TDEError):
    pass


class LogFull(TDEError):
    pass


class BadBootRecord(TDEError):
    pass


class IoError(TDEError):
    pass


# -- parser ----------------------------------------------------------------

class UnterminatedString(TDEError):
    def __init__(self, line: int, column: int):
        super().__init__(f"unterminated string literal at line {line}, column {column}")
        self.line = line
        self.column = column


class DDLSyntaxError(TDEError):
    code = "SyntaxError"

    def __init__(self, expected: str, found: str, line: int, column: int):
        super().__init__(
            f"expected {expected}, found {found} at line {line}, column {column}"
        )
        self.expected = expected
        self.found = found
        self.line = line
        self.column = column


# -- engine and media ------------------------------------------------------

class ContextError(TDEError):
    pass


class LockHeld(TDEError):
    pass


class DatabaseNotFound(TDEError):
    pass


class DatabaseInaccessible(TDEError):
    pass


class DuplicateDatabaseName(TDEError):
    pass


class CorruptImage(TDEError):
    pass
