"""Key hierarchy: machine key -> SMK -> DMK -> certificate -> DEK.

Each level wraps the one below it:

* the machine key (PBKDF2 over an instance secret) wraps the Service Master
  Key,
* the SMK, and separately a password, wrap the Database Master Key,
* the DMK, or a password after ``alter_certificate_private_key_password``,
  wraps each certificate's RSA private key,
* a certificate's RSA public key wraps a database's DEK, which lives in that
  database's boot record rather than in the key store.

Symmetric wraps are AES-128-CTR followed by a truncated HMAC-SHA-256 over
the whole blob (encrypt-then-MAC). Asymmetric wraps are RSA-OAEP-SHA-256.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import time
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import TYPE_CHECKING

from cryptography.exceptions import UnsupportedAlgorithm as _CryptoUnsupported
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

from . import _binio as bio
from . import errors
from .pager import ALGORITHM_IDS, BootRecord, aes_ctr

if TYPE_CHECKING:
    from .pager import Database

KDF_ITERATIONS = 100_000
KDF_KEY_SIZE = 16
SALT_SIZE = 16
MAC_SIZE = 16
THUMBPRINT_SIZE = 20
MIN_MACHINE_SECRET = 16
RSA_KEY_BITS = 2048

STORE_MAGIC = b"TDEKEYS1"
STORE_VERSION = 1
CERT_MAGIC = b"TDECERT1"
PVK_MAGIC = b"TDEPVK1"
BACKUP_VERSION = 1

SCHEME_SYMMETRIC = 1
SCHEME_PASSWORD = 2
SCHEME_RSA_OAEP = 3

REC_SMK = 1
REC_DMK = 2
REC_CERT = 3

_OAEP = padding.OAEP(mgf=padding.MGF1(algorithm=hashes.SHA256()),
                     algorithm=hashes.SHA256(), label=None)


# -- primitives -----------------------------------------------------------

def derive_key(secret: bytes, salt: bytes) -> bytes:
    """PBKDF2-HMAC-SHA-256 with the store's fixed parameters."""
    return hashlib.pbkdf2_hmac("sha256", secret, salt, KDF_ITERATIONS, KDF_KEY_SIZE)


def _subkeys(key: bytes) -> tuple[bytes, bytes]:
    return (hashlib.sha256(key + b"\x01").digest()[:16],
            hashlib.sha256(key + b"\x02").digest())


@dataclass(frozen=True)
class WrappedBlob:
    scheme_id: int
    iv_or_label: bytes
    ciphertext: bytes
    mac: bytes = b""
    salt: bytes = b""

    @property
    def symmetric(self) -> bool:
        return self.scheme_id in (SCHEME_SYMMETRIC, SCHEME_PASSWORD)

    def mac_input(self) -> bytes:
        return (bio.u8(self.scheme_id) + bio.blob(self.salt)
                + bio.blob(self.iv_or_label) + bio.blob(self.ciphertext))

    def to_bytes(self) -> bytes:
        return self.mac_input() + (bio.blob(self.mac) if self.symmetric else b"")

    @classmethod
    def from_bytes(cls, raw: bytes, error: type[Exception] = errors.DecryptFailed) -> "WrappedBlob":
        r = bio.Reader(raw, error)
        scheme = r.u8()
        if scheme not in (SCHEME_SYMMETRIC, SCHEME_PASSWORD, SCHEME_RSA_OAEP):
            raise error(f"unknown wrap scheme {scheme}")
        salt, iv, ct = r.blob(), r.blob(), r.blob()
        mac = r.blob() if scheme != SCHEME_RSA_OAEP else b""
        if not r.at_end():
            raise error("trailing bytes after wrapped blob")
        if scheme != SCHEME_RSA_OAEP and len(mac) != MAC_SIZE:
            raise error("bad MAC length")
        return cls(scheme, iv, ct, mac, salt)


def wrap_symmetric(key: bytes, plaintext: bytes, *, scheme: int = SCHEME_SYMMETRIC,
                   salt: bytes = b"") -> WrappedBlob:
    enc_key, mac_key = _subkeys(key)
    iv = os.urandom(16)
    unsigned = WrappedBlob(scheme, iv, aes_ctr(enc_key, iv, plaintext), b"", salt)
    mac = hmac.new(mac_key, unsigned.mac_input(), hashlib.sha256).digest()[:MAC_SIZE]
    return replace(unsigned, mac=mac)


def unwrap_symmetric(key: bytes, blob: WrappedBlob) -> bytes:
    if not blob.symmetric:
        raise errors.DecryptFailed("not a symmetric blob")
    enc_key, mac_key = _subkeys(key)
    expected = hmac.new(mac_key, blob.mac_input(), hashlib.sha256).digest()[:MAC_SIZE]
    if not hmac.compare_digest(expected, blob.mac):
        raise errors.DecryptFailed("MAC check failed")
    return aes_ctr(enc_key, blob.iv_or_label, blob.ciphertext)


def wrap_with_password(password: str, plaintext: bytes) -> WrappedBlob:
    if not password:
        raise errors.EmptyPassword("password must not be empty")
    salt = os.urandom(SALT_SIZE)
    return wrap_symmetric(derive_key(password.encode("utf-8"), salt), plaintext,
                          scheme=SCHEME_PASSWORD, salt=salt)


def unwrap_with_password(password: str, blob: WrappedBlob) -> bytes:
    if blob.scheme_id != SCHEME_PASSWORD:
        raise errors.DecryptFailed("not a password-wrapped blob")
    return unwrap_symmetric(derive_key(password.encode("utf-8"), blob.salt), blob)


def wrap_asymmetric(public_key: rsa.RSAPublicKey, plaintext: bytes) -> WrappedBlob:
    return WrappedBlob(SCHEME_RSA_OAEP, b"", public_key.encrypt(plaintext, _OAEP))


def unwrap_asymmetric(private_key: rsa.RSAPrivateKey, blob: WrappedBlob) -> bytes:
    if blob.scheme_id != SCHEME_RSA_OAEP:
        raise errors.DecryptFailed("not an RSA-OAEP blob")
    try:
        return private_key.decrypt(blob.ciphertext, _OAEP)
    except ValueError as exc:
        raise errors.DecryptFailed("RSA-OAEP decryption failed") from exc


def public_key_bytes(public_key: rsa.RSAPublicKey) -> bytes:
    """Canonical public key serialization: DER SubjectPublicKeyInfo."""
    return public_key.public_bytes(serialization.Encoding.DER,
                                   serialization.PublicFormat.SubjectPublicKeyInfo)


def compute_thumbprint(public_der: bytes) -> bytes:
    return hashlib.sha256(public_der).digest()[:THUMBPRINT_SIZE]


def _private_der(private_key: rsa.RSAPrivateKey) -> bytes:
    return private_key.private_bytes(serialization.Encoding.DER,
                                     serialization.PrivateFormat.PKCS8,
                                     serialization.NoEncryption())


def _load_private(der: bytes, error: type[Exception]) -> rsa.RSAPrivateKey:
    try:
        key = serialization.load_der_private_key(der, password=None)
    except (ValueError, TypeError, _CryptoUnsupported) as exc:
        raise error("private key does not parse") from exc
    if not isinstance(key, rsa.RSAPrivateKey):
        raise error("private key is not RSA")
    return key


def _load_public(der: bytes, error: type[Exception]) -> rsa.RSAPublicKey:
    try:
        key = serialization.load_der_public_key(der)
    except (ValueError, TypeError, _CryptoUnsupported) as exc:
        raise error("public key does not parse") from exc
    if not isinstance(key, rsa.RSAPublicKey):
        raise error("public key is not RSA")
    return key


# -- key records ------------------------------------------------------------

class Protection(IntEnum):
    BY_DMK = 1
    BY_PASSWORD = 2


@dataclass
class ServiceMasterKey:
    key_bytes: bytes = field(repr=False)
    wrapped: WrappedBlob = field(repr=False)
    created_at: int = 0


@dataclass
class DatabaseMasterKey:
    wrapped_by_smk: WrappedBlob = field(repr=False)
    wrapped_by_password: WrappedBlob = field(repr=False)
    created_at: int = 0
    key_bytes: bytes | None = field(default=None, repr=False)


@dataclass
class Certificate:
    name: str
    subject: str
    public_key_der: bytes = field(repr=False)
    private_key_wrapped: WrappedBlob = field(repr=False)
    private_key_protection: Protection
    thumbprint: bytes
    created_at: int = 0

    @property
    def public_key(self) -> rsa.RSAPublicKey:
        return _load_public(self.public_key_der, errors.CorruptKeyStore)

    def _encode(self) -> bytes:
        return b"".join([
            bio.text(self.name), bio.text(self.subject), bio.blob(self.public_key_der),
            bio.blob(self.private_key_wrapped.to_bytes()),
            bio.u8(int(self.private_key_protection)), self.thumbprint, bio.u64(self.created_at),
        ])

    @classmethod
    def _decode(cls, body: bytes) -> "Certificate":
        r = bio.Reader(body, errors.CorruptKeyStore)
        cert = cls(name=r.text(), subject=r.text(), public_key_der=r.blob(),
                   private_key_wrapped=WrappedBlob.from_bytes(r.blob(), errors.CorruptKeyStore),
                   private_key_protection=Protection(r.u8()),
                   thumbprint=r.take(THUMBPRINT_SIZE), created_at=r.u64())
        if not r.at_end():
            raise errors.CorruptKeyStore("trailing bytes in certificate record")
        return cert


@dataclass
class DatabaseEncryptionKey:
    algorithm: str
    key_bytes: bytes = field(repr=False)
    wrapped_blob: WrappedBlob = field(repr=False)
    certificate_thumbprint: bytes = b""


# -- the store -------------------------------------------------------------

class KeyStore:
    """The instance's master key store, persisted as ``master.keystore``.

    File layout: magic ``TDEKEYS1``, version u32, 16-byte instance salt, then
    ``type u8 | length u32 | body`` records. The salt is cleartext; it only
    feeds the machine-key derivation.
    """

    FILENAME = "master.keystore"

    def __init__(self, path: Path, salt: bytes):
        self.path = Path(path)
        self.salt = salt
        self.smk_record: tuple[WrappedBlob, int] | None = None
        self.dmk: DatabaseMasterKey | None = None
        self._certs: dict[str, Certificate] = {}
        self._smk: ServiceMasterKey | None = None

    # -- persistence -------------------------------------------------------

    @classmethod
    def create(cls, path: str | os.PathLike) -> "KeyStore":
        path = Path(path)
        if path.exists():
            raise errors.AlreadyInitialized(f"{path} already exists")
        store = cls(path, os.urandom(SALT_SIZE))
        store._save()
        return store

    @classmethod
    def load(cls, path: str | os.PathLike) -> "KeyStore":
        path = Path(path)
        try:
            raw = path.read_bytes()
        except FileNotFoundError as exc:
            raise errors.NotInitialized(f"no key store at {path}") from exc
        except OSError as exc:
            raise errors.IoError(str(exc)) from exc
        r = bio.Reader(raw, errors.CorruptKeyStore)
        if r.take(8) != STORE_MAGIC:
            raise errors.CorruptKeyStore("bad key store magic")
        if r.u32() != STORE_VERSION:
            raise errors.CorruptKeyStore("unsupported key store version")
        store = cls(path, r.take(SALT_SIZE))
        for rtype, body in r.records():
            br = bio.Reader(body, errors.CorruptKeyStore)
            if rtype == REC_SMK:
                store.smk_record = (WrappedBlob.from_bytes(br.blob(), errors.CorruptKeyStore), br.u64())
            elif rtype == REC_DMK:
                store.dmk = DatabaseMasterKey(
                    wrapped_by_smk=WrappedBlob.from_bytes(br.blob(), errors.CorruptKeyStore),
                    wrapped_by_password=WrappedBlob.from_bytes(br.blob(), errors.CorruptKeyStore),
                    created_at=br.u64())
            elif rtype == REC_CERT:
                cert = Certificate._decode(body)
                store._certs[cert.name.casefold()] = cert
            else:
                raise errors.CorruptKeyStore(f"unknown record type {rtype}")
        return store

    @classmethod
    def open(cls, path: str | os.PathLike, machine_secret: bytes) -> "KeyStore":
        """Open (or on first use create) a store and unlock its SMK."""
        path = Path(path)
        if not path.exists():
            _check_machine_secret(machine_secret)
            store = cls.create(path)
            store.init_service_master_key(machine_secret)
            return store
        store = cls.load(path)
        if store.smk_record is not None:
            store.unlock(machine_secret)
        return store

    def _save(self) -> None:
        parts = [STORE_MAGIC, bio.u32(STORE_VERSION), self.salt]
        if self.smk_record is not None:
            blob, created = self.smk_record
            parts.append(bio.record(REC_SMK, bio.blob(blob.to_bytes()) + bio.u64(created)))
        if self.dmk is not None:
            parts.append(bio.record(REC_DMK, bio.blob(self.dmk.wrapped_by_smk.to_bytes())
                                    + bio.blob(self.dmk.wrapped_by_password.to_bytes())
                                    + bio.u64(self.dmk.created_at)))
        for cert in self._certs.values():
            parts.append(bio.record(REC_CERT, cert._encode()))
        try:
            bio.atomic_write(self.path, b"".join(parts))
        except OSError as exc:
            raise errors.IoError(str(exc)) from exc

    # -- service master key ------------------------------------------------

    def _machine_key(self, machine_secret: bytes) -> bytes:
        _check_machine_secret(machine_secret)
        return derive_key(machine_secret, self.salt)

    def init_service_master_key(self, machine_secret: bytes) -> ServiceMasterKey:
        if self.smk_record is not None:
            raise errors.AlreadyInitialized("service master key already exists")
        key = os.urandom(32)
        wrapped = wrap_symmetric(self._machine_key(machine_secret), key)
        created = int(time.time())
        self.smk_record = (wrapped, created)
        self._smk = ServiceMasterKey(key, wrapped, created)
        self._save()
        return self._smk

    def unlock(self, machine_secret: bytes) -> ServiceMasterKey:
        if self.smk_record is None:
            raise errors.NoServiceMasterKey("key store has no service master key")
        wrapped, created = self.smk_record
        try:
            key = unwrap_symmetric(self._machine_key(machine_secret), wrapped)
        except errors.DecryptFailed as exc:
            raise errors.MachineSecretMismatch(
                "machine secret does not unlock the service master key") from exc
        self._smk = ServiceMasterKey(key, wrapped, created)
        return self._smk

    @property
    def service_master_key(self) -> ServiceMasterKey | None:
        return self._smk

    def delete_service_master_key(self) -> None:
        self.smk_record = None
        self._smk = None
        self._save()

    # -- database master key -----------------------------------------------

    def create_database_master_key(self, password: str) -> DatabaseMasterKey:
        if self._smk is None:
            raise errors.NoServiceMasterKey("create or unlock the service master key first")
        if self.dmk is not None:
            raise errors.DmkAlreadyExists("a database master key already exists")
        if not password:
            raise errors.EmptyPassword("master key password must not be empty")
        key = os.urandom(32)
        self.dmk = DatabaseMasterKey(wrapped_by_smk=wrap_symmetric(self._smk.key_bytes, key),
                                     wrapped_by_password=wrap_with_password(password, key),
                                     created_at=int(time.time()))
        self._save()
        return replace(self.dmk, key_bytes=key)

    def open_database_master_key(self, password: str | None = None) -> DatabaseMasterKey:
        """Unwrap the DMK, via the SMK when possible, else via ``password``."""
        if self.dmk is None:
            raise errors.NoDatabaseMasterKey("no database master key in the store")
        if self._smk is not None:
            try:
                key = unwrap_symmetric(self._smk.key_bytes, self.dmk.wrapped_by_smk)
                return replace(self.dmk, key_bytes=key)
            except errors.DecryptFailed:
                pass
        if password:
            try:
                key = unwrap_with_password(password, self.dmk.wrapped_by_password)
                return replace(self.dmk, key_bytes=key)
            except errors.DecryptFailed:
                pass
        raise errors.DecryptFailed("database master key could not be opened")

    def delete_database_master_key(self) -> None:
        self.dmk = None
        self._save()

    # -- certificates ------------------------------------------------------

    @property
    def certificates(self) -> list[Certificate]:
        return list(self._certs.values())

    def get_certificate(self, name: str) -> Certificate:
        try:
            return self._certs[name.casefold()]
        except KeyError:
            raise errors.CertificateNotFound(f"certificate {name!r} not found") from None

    def find_certificate(self, thumbprint: bytes) -> Certificate:
        for cert in self._certs.values():
            if hmac.compare_digest(cert.thumbprint, thumbprint):
                return cert
        raise errors.CertificateNotFound(
            f"no certificate with thumbprint {thumbprint.hex()} in the store")

    def drop_certificate(self, name: str) -> None:
        self.get_certificate(name)
        del self._certs[name.casefold()]
        self._save()

    def _install(self, name: str, subject: str, private_key: rsa.RSAPrivateKey,
                 created_at: int) -> Certificate:
        dmk = self.open_database_master_key()
        public_der = public_key_bytes(private_key.public_key())
        cert = Certificate(name=name, subject=subject, public_key_der=public_der,
                           private_key_wrapped=wrap_symmetric(dmk.key_bytes, _private_der(private_key)),
                           private_key_protection=Protection.BY_DMK,
                           thumbprint=compute_thumbprint(public_der), created_at=created_at)
        self._certs[name.casefold()] = cert
        self._save()
        return cert

    def create_certificate(self, name: str, subject: str) -> Certificate:
        if name.casefold() in self._certs:
            raise errors.DuplicateCertificateName(f"certificate {name!r} already exists")
        self.open_database_master_key()
        private_key = rsa.generate_private_key(public_exponent=65537, key_size=RSA_KEY_BITS)
        return self._install(name, subject, private_key, int(time.time()))

    def _private_key(self, cert: Certificate, password: str | None) -> rsa.RSAPrivateKey:
        if cert.private_key_protection == Protection.BY_PASSWORD:
            if not password:
                raise errors.PrivateKeyLocked(
                    f"certificate {cert.name!r} is password protected and no password was given")
            try:
                der = unwrap_with_password(password, cert.private_key_wrapped)
            except errors.DecryptFailed as exc:
                raise errors.PrivateKeyLocked(
                    f"wrong password for certificate {cert.name!r}") from exc
        else:
            dmk = self.open_database_master_key()
            der = unwrap_symmetric(dmk.key_bytes, cert.private_key_wrapped)
        return _load_private(der, errors.DecryptFailed)

    def alter_certificate_private_key_password(self, name: str, password: str,
                                               old_password: str | None = None) -> Certificate:
        """Re-protect a private key by password only, removing the DMK wrapping."""
        cert = self.get_certificate(name)
        if not password:
            raise errors.EmptyPassword("certificate password must not be empty")
        der = _private_der(self._private_key(cert, old_password))
        cert.private_key_wrapped = wrap_with_password(password, der)
        cert.private_key_protection = Protection.BY_PASSWORD
        self._save()
        return cert

    # -- database encryption keys ------------------------------------------

    def create_database_encryption_key(self, algorithm: str, certificate_name: str,
                                       db: "Database") -> DatabaseEncryptionKey:
        algorithm = algorithm.upper()
        if algorithm not in ALGORITHM_IDS:
            raise errors.UnsupportedAlgorithm(f"algorithm {algorithm} is not supported")
        cert = self.get_certificate(certificate_name)
        self._private_key(cert, None)
        if db.boot.has_dek:
            raise errors.DekAlreadyExists(f"database {db.name!r} already has an encryption key")
        key = os.urandom(16)
        blob = wrap_asymmetric(cert.public_key, key)
        db.install_dek(ALGORITHM_IDS[algorithm], cert.thumbprint, blob.to_bytes())
        return DatabaseEncryptionKey(algorithm, key, blob, cert.thumbprint)

    def unwrap_dek(self, boot_record: BootRecord, password: str | None = None) -> DatabaseEncryptionKey:
        """Recover a database's DEK from its boot record.

        ``password`` is only consulted for certificates whose private key is
        password protected.
        """
        if not boot_record.has_dek:
            raise errors.NoDekCreated("boot record holds no wrapped DEK")
        algorithm = {v: k for k, v in ALGORITHM_IDS.items()}.get(boot_record.algorithm_id)
        if algorithm is None:
            raise errors.UnsupportedAlgorithm(f"algorithm id {boot_record.algorithm_id}")
        cert = self.find_certificate(boot_record.certificate_thumbprint)
        private_key = self._private_key(cert, password)
        blob = WrappedBlob.from_bytes(boot_record.wrapped_dek)
        key = unwrap_asymmetric(private_key, blob)
        if len(key) != 16:
            raise errors.DecryptFailed("unwrapped DEK has the wrong length")
        return DatabaseEncryptionKey(algorithm, key, blob, cert.thumbprint)

    # -- certificate backup files ------------------------------------------

    def backup_certificate(self, name: str, cert_path: str | os.PathLike,
                           private_key_path: str | os.PathLike, password: str,
                           current_password: str | None = None) -> None:
        """Write the public part to ``cert_path`` and the password-wrapped
        private key to ``private_key_path``."""
        cert = self.get_certificate(name)
        if not password:
            raise errors.EmptyPassword("backup password must not be empty")
        der = _private_der(self._private_key(cert, current_password))
        cert_file = b"".join([
            CERT_MAGIC, bio.u32(BACKUP_VERSION),
            bio.record(1, bio.text(cert.name)), bio.record(2, bio.text(cert.subject)),
            bio.record(3, cert.public_key_der), bio.record(4, bio.u64(cert.created_at)),
            bio.record(5, cert.thumbprint),
        ])
        pvk_file = b"".join([
            PVK_MAGIC, bio.u32(BACKUP_VERSION),
            bio.record(1, cert.thumbprint),
            bio.record(2, wrap_with_password(password, der).to_bytes()),
        ])
        try:
            bio.atomic_write(Path(cert_path), cert_file)
            bio.atomic_write(Path(private_key_path), pvk_file)
        except OSError as exc:
            raise errors.IoError(str(exc)) from exc

    def restore_certificate(self, cert_path: str | os.PathLike,
                            private_key_path: str | os.PathLike, password: str) -> Certificate:
        """Install a backed-up certificate under its original name, re-wrapped
        by this instance's DMK."""
        cert_fields = _read_backup(Path(cert_path), CERT_MAGIC, {1, 2, 3, 4, 5})
        pvk_fields = _read_backup(Path(private_key_path), PVK_MAGIC, {1, 2})
        corrupt = errors.CorruptBackupFile
        name = bio.Reader(cert_fields[1], corrupt).text()
        subject = bio.Reader(cert_fields[2], corrupt).text()
        public_der = cert_fields[3]
        created = bio.Reader(cert_fields[4], corrupt).u64()
        public_key = _load_public(public_der, corrupt)
        thumbprint = compute_thumbprint(public_key_bytes(public_key))
        if not (thumbprint == cert_fields[5] == pvk_fields[1]):
            raise corrupt("thumbprints in the backup files do not match")
        blob = WrappedBlob.from_bytes(pvk_fields[2], corrupt)
        if blob.scheme_id != SCHEME_PASSWORD:
            raise corrupt("private key file is not password protected")
        if name.casefold() in self._certs:
            raise errors.DuplicateCertificateName(f"certificate {name!r} already exists")
        try:
            der = unwrap_with_password(password, blob)
        except errors.DecryptFailed as exc:
            raise errors.BadPassword("wrong password for the private key file") from exc
        private_key = _load_private(der, corrupt)
        if public_key_bytes(private_key.public_key()) != public_der:
            raise corrupt("private key does not match the certificate")
        return self._install(name, subject, private_key, created)


def _check_machine_secret(secret: bytes) -> None:
    if len(secret) < MIN_MACHINE_SECRET:
        raise errors.WeakMachineSecret(
            f"machine secret must be at least {MIN_MACHINE_SECRET} bytes")


def _read_backup(path: Path, magic: bytes, required: set[int]) -> dict[int, bytes]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise errors.IoError(str(exc)) from exc
    r = bio.Reader(raw, errors.CorruptBackupFile)
    if r.take(len(magic)) != magic:
        raise errors.CorruptBackupFile(f"{path.name}: bad magic")
    if r.u32() != BACKUP_VERSION:
        raise errors.CorruptBackupFile(f"{path.name}: unsupported version")
    found: dict[int, bytes] = {}
    for rtype, body in r.records():
        if rtype not in required or rtype in found:
            raise errors.CorruptBackupFile(f"{path.name}: unexpected record {rtype}")
        found[rtype] = body
    if set(found) != required:
        raise errors.CorruptBackupFile(f"{path.name}: missing records")
    return found
