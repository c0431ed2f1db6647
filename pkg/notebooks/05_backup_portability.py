"""
Backups travel encrypted
========================

A backup copies pages exactly as they sit on disk. Restoring it on another
instance works, but the database stays inaccessible until the certificate
and its private key are restored there too.
"""

import os
import shutil
import tempfile
from pathlib import Path

from tdestore import PAYLOAD_SIZE, ServerInstance

CREATE = """
CREATE DATABASE Tiny ON
( NAME = t_dat, FILENAME = 'tiny.mdf', SIZE = 256KB, MAXSIZE = 1MB, FILEGROWTH = 64KB )
LOG ON
( NAME = t_log, FILENAME = 'tiny.ldf', SIZE = 16KB, MAXSIZE = 256KB, FILEGROWTH = 16KB );
CREATE MASTER KEY ENCRYPTION BY PASSWORD = 'origin-dmk';
CREATE CERTIFICATE TinyCert WITH SUBJECT = 'tiny';
"""

ENCRYPT_AND_BACKUP = """
USE Tiny;
CREATE DATABASE ENCRYPTION KEY WITH ALGORITHM = AES_128 ENCRYPTION BY SERVER CERTIFICATE TinyCert;
ALTER DATABASE Tiny SET ENCRYPTION ON;
BACKUP DATABASE Tiny TO DISK = 'tiny.tdebak';
GO
USE master;
BACKUP CERTIFICATE TinyCert TO FILE = 'tiny.cer'
  WITH PRIVATE KEY (FILE = 'tiny.pvk', ENCRYPTION BY PASSWORD = 'export-pw');
GO
"""

root = Path(tempfile.mkdtemp())
origin = ServerInstance.open(root / "origin", b"origin-machine-secret-0000000001")
origin.execute_script(CREATE)
row = os.urandom(PAYLOAD_SIZE)
origin.database("Tiny").write_page(5, row)
for r in origin.execute_script(ENCRYPT_AND_BACKUP):
    print(r.statement, r.ok)
origin.close()

fresh = ServerInstance.open(root / "fresh", b"fresh-machine-secret-00000000002")
for name in ("tiny.tdebak", "tiny.cer", "tiny.pvk"):
    shutil.copy(root / "origin" / name, root / "fresh" / name)
print(fresh.execute_script("RESTORE DATABASE FROM DISK = 'tiny.tdebak'")[0].message)
print(fresh.status())

fresh.execute_script(
    "CREATE MASTER KEY ENCRYPTION BY PASSWORD = 'fresh-dmk';\n"
    "RESTORE CERTIFICATE FROM FILE = 'tiny.cer' "
    "WITH PRIVATE KEY (FILE = 'tiny.pvk', DECRYPTION BY PASSWORD = 'export-pw');")
print(fresh.status())
print("page 5 matches origin:", fresh.database("Tiny").read_page(5) == row)
fresh.close()
