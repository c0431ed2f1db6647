"""
Encrypted pages on disk
=======================

A database file is a run of 8 KB pages. With encryption on, each page
payload is AES-CTR ciphertext under the database key and carries a MAC,
yet the application reads and writes plaintext and the files do not grow.
"""

import os
import tempfile
from pathlib import Path

from tdestore import errors
from tdestore.keyvault import SCHEME_RSA_OAEP, DatabaseEncryptionKey, WrappedBlob
from tdestore.pager import PAYLOAD_SIZE, Database, SizeSpec, SizeUnit

work = Path(tempfile.mkdtemp())
kb = lambda n: SizeSpec(n, SizeUnit.KB)
db = Database.create("demo", work / "demo.mdf", work / "demo.ldf",
                     kb(256), kb(1024), kb(64), kb(16), kb(256), kb(16))
print("pages:", db.page_count, "file bytes:", (work / "demo.mdf").stat().st_size)

# a recognizable payload, written while encryption is off
payload = (b"SALES-ROW " * 1000)[:PAYLOAD_SIZE]
db.write_page(3, payload)
db.flush()
print("plaintext visible on disk:", b"SALES-ROW" in (work / "demo.mdf").read_bytes())

# install a key; normally the key hierarchy wraps it, a placeholder is enough here
thumb = b"\x01" * 20
blob = WrappedBlob(SCHEME_RSA_OAEP, b"", os.urandom(256))
db.install_dek(1, thumb, blob.to_bytes())
report = db.set_encryption_on(DatabaseEncryptionKey("AES_128", os.urandom(16), blob, thumb))
print("converted", report.pages, "pages and", report.log_records, "log records")
print("plaintext visible on disk:", b"SALES-ROW" in (work / "demo.mdf").read_bytes())
print("file bytes unchanged:", (work / "demo.mdf").stat().st_size)
print("reads back:", db.read_page(3) == payload)

# flip one byte behind the pager's back
raw = bytearray(db.read_raw_page(3))
raw[100] ^= 1
db.data.write_raw(3, bytes(raw))
try:
    db.read_page(3)
except errors.PageCorrupt as exc:
    print("tamper detected:", exc.code)
db.close()
