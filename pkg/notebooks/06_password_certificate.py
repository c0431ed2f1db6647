"""
Password-protected certificates and restarts
============================================

Once a certificate's private key is protected by a password instead of the
master key, the running instance keeps working, but after a restart the
database cannot be opened until someone supplies that password.
"""

import tempfile
from pathlib import Path

from tdestore import ServerInstance

work = Path(tempfile.mkdtemp())
instance = ServerInstance.open(work, b"narrative-machine-secret-000000001")
instance.execute_script("""
CREATE DATABASE Tiny ON
( NAME = t_dat, FILENAME = 'tiny.mdf', SIZE = 256KB, MAXSIZE = 1MB, FILEGROWTH = 64KB )
LOG ON
( NAME = t_log, FILENAME = 'tiny.ldf', SIZE = 16KB, MAXSIZE = 256KB, FILEGROWTH = 16KB );
CREATE MASTER KEY ENCRYPTION BY PASSWORD = 'dmk';
CREATE CERTIFICATE TinyCert WITH SUBJECT = 'tiny';
GO
USE Tiny;
CREATE DATABASE ENCRYPTION KEY WITH ALGORITHM = AES_128 ENCRYPTION BY SERVER CERTIFICATE TinyCert;
ALTER DATABASE Tiny SET ENCRYPTION ON;
USE master;
ALTER CERTIFICATE TinyCert WITH PRIVATE KEY (ENCRYPTION BY PASSWORD = 'cert-pw');
GO
""")
print("before restart:", instance.status())

instance = instance.restart()
print("after restart: ", instance.status())

entry = instance.open_database("Tiny", certificate_password="cert-pw")
print("with password: ", entry.accessible)

# turning encryption off keeps the wrapped key, so it can come back on directly
for stmt in ("ALTER DATABASE Tiny SET ENCRYPTION OFF", "ALTER DATABASE Tiny SET ENCRYPTION ON"):
    (r,) = instance.execute_script(stmt)
    print(r.message)
instance.close()
