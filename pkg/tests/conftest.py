import os
from pathlib import Path

import pytest

from tdestore.engine import ServerInstance
from tdestore.keyvault import SCHEME_RSA_OAEP, DatabaseEncryptionKey, WrappedBlob
from tdestore.pager import Database, SizeSpec, SizeUnit

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
SECRET = b"unit-test-machine-secret-0123456789"
OTHER_SECRET = b"a-different-machine-secret-987654321"

SMALL_DB = """
CREATE DATABASE Tiny ON
( NAME = t_dat, FILENAME = 'C:\\data\\tiny.mdf', SIZE = 256KB, MAXSIZE = 1MB, FILEGROWTH = 64KB )
LOG ON
( NAME = t_log, FILENAME = 'C:\\data\\tiny.ldf', SIZE = 16KB, MAXSIZE = 256KB, FILEGROWTH = 16KB );
GO
"""

ENCRYPT_TINY = """
CREATE MASTER KEY ENCRYPTION BY PASSWORD = 'Str0ng!';
CREATE CERTIFICATE TinyCert WITH SUBJECT = 'tiny';
GO
USE Tiny;
CREATE DATABASE ENCRYPTION KEY WITH ALGORITHM = AES_128 ENCRYPTION BY SERVER CERTIFICATE TinyCert;
ALTER DATABASE Tiny SET ENCRYPTION ON;
GO
"""


@pytest.fixture
def code1() -> str:
    return (FIXTURES / "code1.sql").read_text()


@pytest.fixture
def code2() -> str:
    return (FIXTURES / "code2.sql").read_text()


@pytest.fixture
def make_instance(tmp_path):
    """Open instances under tmp_path and close whatever is still open at teardown."""
    opened = []

    def _make(name="inst", secret=SECRET):
        inst = ServerInstance.open(tmp_path / name, secret)
        opened.append(inst)
        return inst

    _make.track = opened.append
    yield _make
    for inst in opened:
        inst.close()


@pytest.fixture
def sales(make_instance, code1, code2):
    """An instance after running both listings: Sales exists and is encrypted."""
    inst = make_instance()
    for script in (code1, code2):
        results = inst.execute_script(script)
        assert all(r.ok for r in results), results
    return inst


@pytest.fixture
def tiny(make_instance):
    """An instance holding the 32-page database Tiny, encrypted under TinyCert."""
    inst = make_instance()
    results = inst.execute_script(SMALL_DB + ENCRYPT_TINY)
    assert all(r.ok for r in results), results
    return inst


def kb(n):
    return SizeSpec(n, SizeUnit.KB)


@pytest.fixture
def small_db(tmp_path):
    """A 32-page data file and 16 KB log, no key installed."""
    db = Database.create("small", tmp_path / "small.mdf", tmp_path / "small.ldf",
                         kb(256), kb(1024), kb(64), kb(16), kb(256), kb(16))
    yield db
    db.close()


def fake_dek(db: Database) -> DatabaseEncryptionKey:
    """Install a placeholder wrapped DEK and return a usable in-memory DEK."""
    thumb = b"\x5a" * 20
    blob = WrappedBlob(SCHEME_RSA_OAEP, b"", os.urandom(256))
    db.install_dek(1, thumb, blob.to_bytes())
    return DatabaseEncryptionKey("AES_128", os.urandom(16), blob, thumb)


@pytest.fixture
def encrypted_db(small_db):
    dek = fake_dek(small_db)
    small_db.set_encryption_on(dek)
    return small_db


# -- acceptance report --------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or report.outcome != "passed":
        previous = _CRITERIA.get(number, (title, "PASS"))[1]
        outcome = "PASS" if report.outcome == "passed" and previous == "PASS" else "FAIL"
        _CRITERIA[number] = (title, outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:>2}: {outcome}  {title}")
