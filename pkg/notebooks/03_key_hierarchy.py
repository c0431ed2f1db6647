"""
The key hierarchy
=================

machine secret -> service master key -> database master key -> certificate
-> database encryption key. Each key is stored only in wrapped form; take
away one link and everything beneath it is out of reach.
"""

import tempfile
from pathlib import Path

from tdestore import errors
from tdestore.keyvault import KeyStore
from tdestore.pager import Database, SizeSpec, SizeUnit

work = Path(tempfile.mkdtemp())
secret = b"narrative-machine-secret-000000001"
store = KeyStore.open(work / "master.keystore", secret)
store.create_database_master_key("Str0ng!Pass")
cert = store.create_certificate("MySalesCert", "It is my Certificate")
print("certificate thumbprint:", cert.thumbprint.hex())

kb = lambda n: SizeSpec(n, SizeUnit.KB)
db = Database.create("Sales", work / "s.mdf", work / "s.ldf",
                     kb(64), kb(128), kb(64), kb(8), kb(64), kb(8))
dek = store.create_database_encryption_key("AES_128", "MySalesCert", db)
print("wrapped DEK bytes in the boot record:", len(db.boot.wrapped_dek))
print("unwraps to the same key:", store.unwrap_dek(db.boot).key_bytes == dek.key_bytes)

# the machine secret is the root; a different one cannot open the store
try:
    KeyStore.open(work / "master.keystore", b"some-other-machine-secret-00000002")
except errors.MachineSecretMismatch as exc:
    print("wrong machine secret:", exc.code)

# the DMK is wrapped twice, so the password alone also recovers it
store.delete_service_master_key()
print("DMK via password:", store.open_database_master_key("Str0ng!Pass").key_bytes is not None)

# dropping the certificate strands the DEK
store.drop_certificate("MySalesCert")
try:
    store.unwrap_dek(db.boot)
except errors.CertificateNotFound as exc:
    print("certificate gone:", exc.code)
db.close()
