"""
Running the two DDL listings
============================

The first script creates the Sales database, the second builds the key
chain and switches encryption on. File paths written for another machine
are mapped into the instance directory by file name.
"""

import tempfile
from pathlib import Path

from tdestore import ServerInstance

CREATE = """USE master;
GO
CREATE DATABASE Sales
ON
( NAME = Sales_dat, FILENAME = 'C:\\Program Files\\Microsoft SQL Server\\MSSQL\\DATA\\saledat.mdf',
  SIZE = 10, MAXSIZE = 50, FILEGROWTH = 5 )
LOG ON
( NAME = Sales_log, FILENAME = 'C:\\Program Files\\Microsoft SQL Server\\MSSQL\\DATA\\salelog.ldf',
  SIZE = 5MB, MAXSIZE = 25MB, FILEGROWTH = 5MB );
GO
"""

ENCRYPT = """USE master;
GO
CREATE MASTER KEY ENCRYPTION BY PASSWORD = '<writeanypasswordhere>';
go
CREATE CERTIFICATE MySalesCert WITH SUBJECT = 'It is my Certificate';
go
USE Sales;
GO
CREATE DATABASE ENCRYPTION KEY WITH ALGORITHM = AES_128 ENCRYPTION BY SERVER CERTIFICATE MySalesCert;
GO
ALTER DATABASE Sales SET ENCRYPTION ON;
GO
"""

work = Path(tempfile.mkdtemp())
instance = ServerInstance.open(work, b"narrative-machine-secret-000000001")
for script in (CREATE, ENCRYPT):
    for r in instance.execute_script(script):
        print(f"line {r.line:>2} {r.statement:<28} {r.message}")
print(instance.status())
print(sorted(p.name for p in work.iterdir()))

# keys are unwrapped again from disk after a restart
instance = instance.restart()
print(instance.status())
instance.close()
