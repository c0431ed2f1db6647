import os
import struct

import pytest
from cryptography.hazmat.primitives import serialization

from _oracles import contains_window, sha256
from conftest import FIXTURES, OTHER_SECRET, SECRET, kb
from tdestore import errors
from tdestore.keyvault import (KeyStore, Protection, WrappedBlob, compute_thumbprint,
                               public_key_bytes, unwrap_symmetric, unwrap_with_password,
                               wrap_symmetric)
from tdestore.pager import Database

# sha256 of the DER SubjectPublicKeyInfo of fixtures/test_rsa_key.pem, produced with
#   openssl pkey -in test_rsa_key.pem -pubout -outform DER | sha256sum
FIXED_KEY_THUMBPRINT = "b52a2639864c4d278ff00b5dcfe60c069b5c7e36"


@pytest.fixture
def store(tmp_path):
    return KeyStore.open(tmp_path / "master.keystore", SECRET)


@pytest.fixture
def store_with_cert(store):
    store.create_database_master_key("Str0ng!Pass")
    store.create_certificate("MySalesCert", "It is my Certificate")
    return store


@pytest.fixture
def db(tmp_path):
    d = Database.create("Sales", tmp_path / "s.mdf", tmp_path / "s.ldf",
                        kb(64), kb(128), kb(64), kb(8), kb(64), kb(8))
    yield d
    d.close()


def private_secrets(store, name):
    cert = store.get_certificate(name)
    numbers = store._private_key(cert, None).private_numbers()
    return [n.to_bytes((n.bit_length() + 7) // 8, "big") for n in (numbers.d, numbers.p, numbers.q)]


# -- service master key ---------------------------------------------------------

def test_smk_round_trip(tmp_path, store):
    key = store.service_master_key.key_bytes
    assert len(key) == 32
    reopened = KeyStore.open(tmp_path / "master.keystore", SECRET)
    assert reopened.service_master_key.key_bytes == key


def test_smk_wrong_secret(tmp_path, store):
    with pytest.raises(errors.MachineSecretMismatch):
        KeyStore.open(tmp_path / "master.keystore", OTHER_SECRET)


def test_smk_twice(store):
    with pytest.raises(errors.AlreadyInitialized):
        store.init_service_master_key(SECRET)


def test_weak_machine_secret(tmp_path):
    with pytest.raises(errors.WeakMachineSecret):
        KeyStore.open(tmp_path / "k", b"short")
    assert not (tmp_path / "k").exists()


def test_store_header_layout(tmp_path, store):
    raw = (tmp_path / "master.keystore").read_bytes()
    assert raw[:8] == b"TDEKEYS1"
    assert struct.unpack_from("<I", raw, 8)[0] == 1
    assert raw[12:28] == store.salt
    rtype, length = struct.unpack_from("<BI", raw, 28)
    assert rtype == 1 and 28 + 5 + length == len(raw)


# -- database master key --------------------------------------------------------

def test_dmk_dual_wrapping(store):
    dmk = store.create_database_master_key("Str0ng!Pass")
    via_smk = unwrap_symmetric(store.service_master_key.key_bytes, dmk.wrapped_by_smk)
    via_password = unwrap_with_password("Str0ng!Pass", dmk.wrapped_by_password)
    assert via_smk == via_password == dmk.key_bytes
    assert store.open_database_master_key().key_bytes == dmk.key_bytes
    assert store.open_database_master_key("wrong").key_bytes == dmk.key_bytes


def test_dmk_errors(tmp_path, store):
    with pytest.raises(errors.NoDatabaseMasterKey):
        store.open_database_master_key()
    with pytest.raises(errors.EmptyPassword):
        store.create_database_master_key("")
    store.create_database_master_key("pw")
    with pytest.raises(errors.DmkAlreadyExists):
        store.create_database_master_key("pw2")
    fresh = KeyStore.create(tmp_path / "other.keystore")
    with pytest.raises(errors.NoServiceMasterKey):
        fresh.create_database_master_key("pw")


def test_dmk_password_fallback(tmp_path, store):
    key = store.create_database_master_key("Str0ng!Pass").key_bytes
    store.delete_service_master_key()
    reopened = KeyStore.open(tmp_path / "master.keystore", SECRET)
    assert reopened.service_master_key is None
    assert reopened.open_database_master_key("Str0ng!Pass").key_bytes == key
    with pytest.raises(errors.DecryptFailed):
        reopened.open_database_master_key("wrong")
    with pytest.raises(errors.DecryptFailed):
        reopened.open_database_master_key()


# -- wrapped blobs --------------------------------------------------------------

def test_symmetric_blob_rejects_every_flip():
    key = os.urandom(32)
    blob = wrap_symmetric(key, os.urandom(32))
    assert unwrap_symmetric(key, blob)
    for field in ("iv_or_label", "ciphertext", "mac"):
        value = getattr(blob, field)
        for i in range(len(value)):
            flipped = bytearray(value)
            flipped[i] ^= 0x01
            tampered = WrappedBlob(**{**blob.__dict__, field: bytes(flipped)})
            with pytest.raises(errors.DecryptFailed):
                unwrap_symmetric(key, tampered)


def test_serialized_blob_rejects_every_flip():
    key = os.urandom(32)
    raw = wrap_symmetric(key, os.urandom(48)).to_bytes()
    for i in range(len(raw)):
        flipped = bytearray(raw)
        flipped[i] ^= 0x01
        with pytest.raises(errors.DecryptFailed):
            unwrap_symmetric(key, WrappedBlob.from_bytes(bytes(flipped)))


def test_blob_round_trip_serialization():
    blob = wrap_symmetric(os.urandom(16), b"payload")
    assert WrappedBlob.from_bytes(blob.to_bytes()) == blob


# -- certificates ---------------------------------------------------------------

def test_create_certificate(store_with_cert):
    cert = store_with_cert.get_certificate("mysalescert")
    assert cert.name == "MySalesCert"
    assert cert.subject == "It is my Certificate"
    assert cert.private_key_protection == Protection.BY_DMK
    assert cert.public_key.key_size == 2048
    assert cert.thumbprint == sha256(cert.public_key_der)[:20]
    assert [c.name for c in store_with_cert.certificates] == ["MySalesCert"]


def test_thumbprint_of_fixed_key():
    key = serialization.load_pem_private_key((FIXTURES / "test_rsa_key.pem").read_bytes(), None)
    der = public_key_bytes(key.public_key())
    assert compute_thumbprint(der).hex() == FIXED_KEY_THUMBPRINT
    assert sha256(der)[:20].hex() == FIXED_KEY_THUMBPRINT


def test_duplicate_certificate(store_with_cert):
    with pytest.raises(errors.DuplicateCertificateName):
        store_with_cert.create_certificate("MYSALESCERT", "again")


def test_certificate_needs_dmk(store):
    with pytest.raises(errors.NoDatabaseMasterKey):
        store.create_certificate("c", "s")


def test_certificates_persist(tmp_path, store_with_cert):
    reopened = KeyStore.open(tmp_path / "master.keystore", SECRET)
    assert reopened.get_certificate("MySalesCert").thumbprint == \
        store_with_cert.get_certificate("MySalesCert").thumbprint


# -- database encryption key ----------------------------------------------------

def test_create_and_unwrap_dek(store_with_cert, db):
    dek = store_with_cert.create_database_encryption_key("AES_128", "MySalesCert", db)
    assert len(dek.key_bytes) == 16
    assert db.boot.wrapped_dek and db.boot.algorithm_id == 1
    assert db.boot.certificate_thumbprint == store_with_cert.get_certificate("MySalesCert").thumbprint
    assert store_with_cert.unwrap_dek(db.boot).key_bytes == dek.key_bytes


def test_dek_errors(store_with_cert, db):
    with pytest.raises(errors.UnsupportedAlgorithm):
        store_with_cert.create_database_encryption_key("AES_256", "MySalesCert", db)
    with pytest.raises(errors.CertificateNotFound):
        store_with_cert.create_database_encryption_key("AES_128", "Nope", db)
    store_with_cert.create_database_encryption_key("AES_128", "MySalesCert", db)
    with pytest.raises(errors.DekAlreadyExists):
        store_with_cert.create_database_encryption_key("AES_128", "MySalesCert", db)


def test_unwrap_dek_without_certificate(tmp_path, store_with_cert, db):
    store_with_cert.create_database_encryption_key("AES_128", "MySalesCert", db)
    other = KeyStore.open(tmp_path / "other.keystore", SECRET)
    other.create_database_master_key("x")
    with pytest.raises(errors.CertificateNotFound):
        other.unwrap_dek(db.boot)


def test_alter_certificate_password(tmp_path, store_with_cert, db):
    dek = store_with_cert.create_database_encryption_key("AES_128", "MySalesCert", db)
    with pytest.raises(errors.EmptyPassword):
        store_with_cert.alter_certificate_private_key_password("MySalesCert", "")
    store_with_cert.alter_certificate_private_key_password("MySalesCert", "certpw")
    reopened = KeyStore.open(tmp_path / "master.keystore", SECRET)
    cert = reopened.get_certificate("MySalesCert")
    assert cert.private_key_protection == Protection.BY_PASSWORD
    assert cert.private_key_wrapped.scheme_id == 2
    with pytest.raises(errors.PrivateKeyLocked):
        reopened.unwrap_dek(db.boot)
    with pytest.raises(errors.PrivateKeyLocked):
        reopened.unwrap_dek(db.boot, "wrong")
    assert reopened.unwrap_dek(db.boot, "certpw").key_bytes == dek.key_bytes


def test_alter_unknown_certificate(store_with_cert):
    with pytest.raises(errors.CertificateNotFound):
        store_with_cert.alter_certificate_private_key_password("Nope", "pw")


# -- certificate backups --------------------------------------------------------

def test_backup_restore_certificate(tmp_path, store_with_cert):
    cert_path, pvk_path = tmp_path / "a.cert", tmp_path / "a.pvk"
    store_with_cert.backup_certificate("MySalesCert", cert_path, pvk_path, "pw")
    assert cert_path.read_bytes()[:8] == b"TDECERT1"
    assert pvk_path.read_bytes()[:7] == b"TDEPVK1"

    other = KeyStore.open(tmp_path / "other.keystore", OTHER_SECRET)
    other.create_database_master_key("other")
    restored = other.restore_certificate(cert_path, pvk_path, "pw")
    original = store_with_cert.get_certificate("MySalesCert")
    assert restored.name == "MySalesCert" and restored.subject == original.subject
    assert restored.thumbprint == original.thumbprint
    assert restored.private_key_protection == Protection.BY_DMK
    with pytest.raises(errors.DuplicateCertificateName):
        other.restore_certificate(cert_path, pvk_path, "pw")


def test_private_key_file_does_not_leak(tmp_path, store_with_cert):
    store_with_cert.backup_certificate("MySalesCert", tmp_path / "a.cert", tmp_path / "a.pvk", "pw")
    for path in (tmp_path / "a.pvk", tmp_path / "a.cert"):
        raw = path.read_bytes()
        for secret in private_secrets(store_with_cert, "MySalesCert"):
            assert not contains_window(raw, secret)


def test_backup_errors(tmp_path, store_with_cert):
    with pytest.raises(errors.CertificateNotFound):
        store_with_cert.backup_certificate("NoSuchCert", tmp_path / "a", tmp_path / "b", "pw")
    with pytest.raises(errors.EmptyPassword):
        store_with_cert.backup_certificate("MySalesCert", tmp_path / "a", tmp_path / "b", "")
    with pytest.raises(errors.IoError):
        store_with_cert.backup_certificate("MySalesCert", tmp_path / "no" / "a",
                                           tmp_path / "b", "pw")


def test_restore_wrong_password(tmp_path, store_with_cert):
    store_with_cert.backup_certificate("MySalesCert", tmp_path / "a.cert", tmp_path / "a.pvk", "pw")
    other = KeyStore.open(tmp_path / "other.keystore", SECRET)
    other.create_database_master_key("x")
    with pytest.raises(errors.BadPassword):
        other.restore_certificate(tmp_path / "a.cert", tmp_path / "a.pvk", "nope")


@pytest.mark.parametrize("which", ["cert", "pvk"])
def test_truncated_backup_files(tmp_path, store_with_cert, which):
    cert_path, pvk_path = tmp_path / "a.cert", tmp_path / "a.pvk"
    store_with_cert.backup_certificate("MySalesCert", cert_path, pvk_path, "pw")
    other = KeyStore.open(tmp_path / "other.keystore", SECRET)
    other.create_database_master_key("x")
    target = cert_path if which == "cert" else pvk_path
    full = target.read_bytes()
    truncated = tmp_path / "truncated"
    args = {"cert": (truncated, pvk_path), "pvk": (cert_path, truncated)}[which]
    for n in range(len(full)):
        truncated.write_bytes(full[:n])
        with pytest.raises(errors.CorruptBackupFile):
            other.restore_certificate(*args, "pw")
    assert other.certificates == []


# -- persisted material ---------------------------------------------------------

def test_no_key_bytes_in_persisted_files(tmp_path, store_with_cert, db):
    dek = store_with_cert.create_database_encryption_key("AES_128", "MySalesCert", db)
    db.set_encryption_on(dek)
    db.write_page(1, os.urandom(8152))
    db.flush()
    store_with_cert.backup_certificate("MySalesCert", tmp_path / "a.cert", tmp_path / "a.pvk", "pw")
    live = [store_with_cert.service_master_key.key_bytes,
            store_with_cert.open_database_master_key().key_bytes,
            dek.key_bytes, db._keys.enc, db._keys.mac, db._keys.log,
            *private_secrets(store_with_cert, "MySalesCert")]
    files = [tmp_path / "master.keystore", db.data.path, db.log.path,
             tmp_path / "a.cert", tmp_path / "a.pvk"]
    for path in files:
        raw = path.read_bytes()
        for secret in live:
            assert not contains_window(raw, secret), (path.name, secret.hex()[:8])
