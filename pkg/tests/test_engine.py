import os
import shutil

import pytest

from conftest import OTHER_SECRET, SECRET, SMALL_DB
from tdestore import errors
from tdestore.engine import CATALOG_FILE, ServerInstance

def codes(results):
    return [r.error for r in results]


def restart(inst, make_instance):
    new = inst.restart()
    make_instance.track(new)
    return new


# -- listings -------------------------------------------------------------------

def test_listings_end_state(tmp_path, make_instance, code1, code2):
    inst = make_instance()
    r1 = inst.execute_script(code1)
    r2 = inst.execute_script(code2)
    assert [r.statement for r in r1] == ["Use", "CreateDatabase"]
    assert [r.statement for r in r2] == ["Use", "CreateMasterKey", "CreateCertificate", "Use",
                                         "CreateDatabaseEncryptionKey",
                                         "AlterDatabaseSetEncryption"]
    assert all(r.ok and r.warning is None for r in r1 + r2)
    assert inst.status() == [{"name": "Sales", "encryption_state": "On",
                              "accessible": True, "last_error": None}]
    assert (tmp_path / "inst" / "saledat.mdf").stat().st_size == 10 * 1024 * 1024
    assert (tmp_path / "inst" / "salelog.ldf").stat().st_size == 5 * 1024 * 1024
    assert inst.session == "Sales"


def test_listings_survive_restart(sales, make_instance):
    payload = os.urandom(8152)
    sales.database("Sales").write_page(7, payload)
    inst = restart(sales, make_instance)
    assert inst.session == "master"
    assert inst.status()[0]["encryption_state"] == "On"
    assert inst.database("Sales").read_page(7) == payload


def test_catalog_is_relocatable(tmp_path, sales, make_instance):
    payload = os.urandom(8152)
    sales.database("sales").write_page(3, payload)
    sales.close()
    assert b"saledat.mdf" in (tmp_path / "inst" / CATALOG_FILE).read_bytes()
    assert str(tmp_path).encode() not in (tmp_path / "inst" / CATALOG_FILE).read_bytes()
    shutil.move(tmp_path / "inst", tmp_path / "moved")
    inst = make_instance("moved")
    assert inst.database("Sales").read_page(3) == payload


def test_deterministic_across_directories(make_instance, code1, code2):
    outs = []
    for name in ("a", "b"):
        inst = make_instance(name)
        results = inst.execute_script(code1) + inst.execute_script(code2)
        outs.append(([(r.statement, r.line, r.ok, r.message, r.error) for r in results],
                     inst.status(),
                     # key store length varies with the DER size of fresh RSA keys
                     sorted((p.name, p.stat().st_size) for p in inst.data_dir.iterdir()
                            if p.name != "master.keystore")))
    assert outs[0] == outs[1]


# -- context and batch semantics ------------------------------------------------

def test_master_key_needs_master_context(tiny):
    results = tiny.execute_script("USE Tiny;\nCREATE MASTER KEY ENCRYPTION BY PASSWORD = 'x';\n")
    assert codes(results) == [None, "ContextError"]
    results = tiny.execute_script("USE Tiny\nCREATE CERTIFICATE C2 WITH SUBJECT = 's'\n")
    assert codes(results) == [None, "ContextError"]


def test_dek_needs_user_context(make_instance):
    inst = make_instance()
    results = inst.execute_script(
        "USE master;\nCREATE DATABASE ENCRYPTION KEY WITH ALGORITHM = AES_128 "
        "ENCRYPTION BY SERVER CERTIFICATE C;\n")
    assert codes(results) == [None, "ContextError"]


def test_failure_aborts_only_its_batch(make_instance):
    inst = make_instance()
    script = "USE master\nUSE Nowhere\nUSE master\nGO\n\nUSE master\nGO\n"
    results = inst.execute_script(script)
    assert [(r.line, r.ok, r.error) for r in results] == [
        (1, True, None), (2, False, "DatabaseNotFound"), (6, True, None)]


def test_syntax_error_runs_nothing(tmp_path, make_instance):
    inst = make_instance()
    with pytest.raises(errors.DDLSyntaxError) as exc:
        inst.execute_script(SMALL_DB + "USE Tiny\nGO\nALTER DATABASE Tiny SET ENCRYPTION\n")
    assert exc.value.line == 9
    assert inst.status() == []
    assert not (tmp_path / "inst" / "tiny.mdf").exists()


@pytest.mark.parametrize("script, code", [
    ("ALTER DATABASE Tiny SET ENCRYPTION ON", "NoDekCreated"),
    ("ALTER DATABASE Tiny SET ENCRYPTION OFF", "AlreadyOff"),
    ("ALTER DATABASE Nope SET ENCRYPTION ON", "DatabaseNotFound"),
    ("CREATE MASTER KEY ENCRYPTION BY PASSWORD = ''", "EmptyPassword"),
    ("USE Tiny\nCREATE DATABASE ENCRYPTION KEY WITH ALGORITHM = AES_256 "
     "ENCRYPTION BY SERVER CERTIFICATE C", "UnsupportedAlgorithm"),
    ("USE Tiny\nCREATE DATABASE ENCRYPTION KEY WITH ALGORITHM = AES_128 "
     "ENCRYPTION BY SERVER CERTIFICATE C", "CertificateNotFound"),
])
def test_statement_errors(make_instance, script, code):
    inst = make_instance()
    inst.execute_script(SMALL_DB)
    assert codes(inst.execute_script(script))[-1] == code


def test_duplicate_database(tiny):
    assert codes(tiny.execute_script(SMALL_DB)) == ["DuplicateDatabaseName"]
    results = tiny.execute_script(SMALL_DB.replace("Tiny", "Other"))
    assert codes(results) == ["FileExists"]


def test_already_on_is_warning(tiny):
    (result,) = tiny.execute_script("ALTER DATABASE Tiny SET ENCRYPTION ON")
    assert result.ok and result.warning == "AlreadyOn"


def test_dek_twice(tiny):
    results = tiny.execute_script(
        "USE Tiny\nCREATE DATABASE ENCRYPTION KEY WITH ALGORITHM = AES_128 "
        "ENCRYPTION BY SERVER CERTIFICATE TinyCert")
    assert codes(results) == [None, "DekAlreadyExists"]


def test_toggle_keeps_data(tiny, make_instance):
    payloads = {p: os.urandom(8152) for p in (1, 5, 31)}
    db = tiny.database("Tiny")
    for p, data in payloads.items():
        db.write_page(p, data)
    assert all(r.ok for r in tiny.execute_script("ALTER DATABASE Tiny SET ENCRYPTION OFF"))
    assert tiny.status()[0]["encryption_state"] == "Off"
    inst = restart(tiny, make_instance)
    assert inst.status()[0] == {"name": "Tiny", "encryption_state": "Off",
                                "accessible": True, "last_error": None}
    assert all(r.ok for r in inst.execute_script("ALTER DATABASE Tiny SET ENCRYPTION ON"))
    for p, data in payloads.items():
        assert inst.database("Tiny").read_page(p) == data


# -- lifecycle ------------------------------------------------------------------

def test_lock_held(tmp_path, make_instance):
    make_instance()
    with pytest.raises(errors.LockHeld):
        ServerInstance.open(tmp_path / "inst", SECRET)


def test_lock_released_on_close(tmp_path, make_instance):
    make_instance().close()
    make_instance()


def test_wrong_machine_secret(tmp_path, make_instance):
    make_instance().close()
    with pytest.raises(errors.MachineSecretMismatch):
        ServerInstance.open(tmp_path / "inst", OTHER_SECRET)
    # the failed open must not leave the lock held
    make_instance()


def test_password_protected_certificate_after_restart(tiny, make_instance):
    payload = os.urandom(8152)
    tiny.database("Tiny").write_page(2, payload)
    results = tiny.execute_script(
        "USE master\nALTER CERTIFICATE TinyCert WITH PRIVATE KEY (ENCRYPTION BY PASSWORD = 'certpw')")
    assert all(r.ok for r in results)
    # live key stays usable until the restart
    assert tiny.database("Tiny").read_page(2) == payload
    inst = restart(tiny, make_instance)
    assert inst.status()[0]["last_error"] == "PrivateKeyLocked"
    with pytest.raises(errors.DatabaseInaccessible):
        inst.database("Tiny")
    assert inst.open_database("Tiny", "wrong").last_error == "PrivateKeyLocked"
    assert inst.open_database("Tiny", "certpw").accessible
    assert inst.database("Tiny").read_page(2) == payload


def test_drop_database(tmp_path, tiny):
    tiny.drop_database("tiny")
    assert tiny.status() == []
    assert not (tmp_path / "inst" / "tiny.mdf").exists()
    with pytest.raises(errors.DatabaseNotFound):
        tiny.drop_database("Tiny")


def test_missing_files_mark_inaccessible(tmp_path, tiny, make_instance):
    tiny.close()
    (tmp_path / "inst" / "tiny.ldf").unlink()
    inst = make_instance()
    (row,) = inst.status()
    assert row["accessible"] is False and row["last_error"] == "IoError"


def test_encryption_on_without_certificate(tiny, make_instance):
    assert all(r.ok for r in tiny.execute_script("ALTER DATABASE Tiny SET ENCRYPTION OFF"))
    tiny.keystore.drop_certificate("TinyCert")
    inst = restart(tiny, make_instance)
    assert inst.status()[0]["accessible"]
    assert codes(inst.execute_script("ALTER DATABASE Tiny SET ENCRYPTION ON")) == \
        ["CertificateNotFound"]
    assert inst.status()[0]["encryption_state"] == "Off"
    assert inst.database("Tiny").read_page(1) == bytes(8152)
