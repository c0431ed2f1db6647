"""Command-line front end.

    tdestore [--data-dir DIR] [--json] init
    tdestore run SCRIPT.sql
    tdestore status
    tdestore backup-db NAME FILE | restore-db FILE | attach-db DATA LOG
    tdestore backup-cert NAME CERT PVK [--password PW]
    tdestore restore-cert CERT PVK [--password PW]
    tdestore cipher shift TEXT [--key N] [--decrypt] | cipher reverse TEXT

The machine secret comes from ``$TDE_MACHINE_SECRET`` if set, otherwise from
``<data-dir>/machine.secret``. Exit codes: 0 success, 1 execution error,
2 syntax error.
"""

from __future__ import annotations

import argparse
import getpass
import json
import os
import secrets
import sys
from dataclasses import dataclass
from pathlib import Path

from . import backup, cipherlab, errors
from .engine import ServerInstance
from .keyvault import KeyStore

SECRET_ENV = "TDE_MACHINE_SECRET"
SECRET_FILE = "machine.secret"


@dataclass
class CliConfig:
    data_dir: Path
    json: bool = False

    @property
    def secret_file(self) -> Path:
        return self.data_dir / SECRET_FILE

    def machine_secret(self) -> bytes | None:
        env = os.environ.get(SECRET_ENV)
        if env:
            return env.encode("utf-8")
        if self.secret_file.exists():
            return self.secret_file.read_bytes()
        return None


class _Out:
    def __init__(self, config: CliConfig):
        self.config = config

    def emit(self, human: str, payload: dict) -> None:
        if self.config.json:
            print(json.dumps(payload, indent=2))
        else:
            print(human)

    def error(self, exc: errors.TDEError, code: int = 1) -> int:
        if self.config.json:
            print(json.dumps({"ok": False, "error": exc.code, "message": str(exc)}, indent=2))
        else:
            print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return code


def _open(config: CliConfig) -> ServerInstance:
    if not (config.data_dir / KeyStore.FILENAME).exists():
        raise errors.NotInitialized(f"{config.data_dir} is not an initialized instance; run init")
    secret = config.machine_secret()
    if secret is None:
        raise errors.NoMachineSecret(f"set {SECRET_ENV} or provide {config.secret_file}")
    return ServerInstance.open(config.data_dir, secret)


def _password(args) -> str:
    return args.password if args.password is not None else getpass.getpass("Password: ")


def cmd_init(config: CliConfig, args) -> int:
    out = _Out(config)
    if (config.data_dir / KeyStore.FILENAME).exists():
        return out.error(errors.AlreadyInitialized(f"{config.data_dir} is already initialized"))
    config.data_dir.mkdir(parents=True, exist_ok=True)
    secret = config.machine_secret()
    if secret is None:
        secret = secrets.token_bytes(32)
        fd = os.open(config.secret_file, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o600)
        with os.fdopen(fd, "wb") as fh:
            fh.write(secret)
    ServerInstance.open(config.data_dir, secret).close()
    out.emit("instance initialized", {"ok": True, "message": "instance initialized"})
    return 0


def _format_result(r) -> str:
    if r.ok:
        suffix = f" (warning: {r.warning})" if r.warning else ""
        return f"line {r.line}: {r.statement}: {r.message}{suffix}"
    return f"line {r.line}: {r.statement}: error {r.error}: {r.message}"


def cmd_run(config: CliConfig, args) -> int:
    out = _Out(config)
    try:
        script = Path(args.script).read_text(encoding="utf-8")
    except OSError as exc:
        return out.error(errors.IoError(str(exc)))
    with _open(config) as instance:
        try:
            results = instance.execute_script(script)
        except (errors.DDLSyntaxError, errors.UnterminatedString) as exc:
            return out.error(exc, code=2)
    ok = all(r.ok for r in results)
    out.emit("\n".join(_format_result(r) for r in results),
             {"ok": ok, "results": [r.to_dict() for r in results]})
    return 0 if ok else 1


def cmd_status(config: CliConfig, args) -> int:
    with _open(config) as instance:
        rows = instance.status()
    if config.json:
        print(json.dumps({"databases": rows}, indent=2))
        return 0
    if not rows:
        print("no databases")
    for row in rows:
        access = "accessible" if row["accessible"] else f"inaccessible ({row['last_error']})"
        print(f"{row['name']}\tencryption={row['encryption_state']}\t{access}")
    return 0


def _entry_payload(entry) -> dict:
    return {"ok": True, "name": entry.name, "accessible": entry.accessible,
            "last_error": entry.last_error}


def cmd_backup_db(config: CliConfig, args) -> int:
    with _open(config) as instance:
        summary = backup.backup_database(instance, args.name, Path(args.file).absolute())
    _Out(config).emit(f"backed up {summary.db_name} to {summary.path}",
                      {"ok": True, "name": summary.db_name, "pages": summary.pages,
                       "log_bytes": summary.log_bytes, "digest": summary.digest.hex()})
    return 0


def cmd_restore_db(config: CliConfig, args) -> int:
    with _open(config) as instance:
        entry = backup.restore_database(instance, Path(args.file))
    note = "" if entry.accessible else f" (inaccessible: {entry.last_error})"
    _Out(config).emit(f"restored {entry.name}{note}", _entry_payload(entry))
    return 0


def cmd_attach_db(config: CliConfig, args) -> int:
    with _open(config) as instance:
        entry = backup.attach_database(instance, Path(args.data), Path(args.log))
    note = "" if entry.accessible else f" (inaccessible: {entry.last_error})"
    _Out(config).emit(f"attached {entry.name}{note}", _entry_payload(entry))
    return 0


def cmd_backup_cert(config: CliConfig, args) -> int:
    password = _password(args)
    with _open(config) as instance:
        instance.keystore.backup_certificate(args.name, Path(args.cert), Path(args.pvk), password)
    _Out(config).emit(f"certificate {args.name} backed up", {"ok": True, "name": args.name})
    return 0


def cmd_restore_cert(config: CliConfig, args) -> int:
    password = _password(args)
    with _open(config) as instance:
        cert = instance.keystore.restore_certificate(Path(args.cert), Path(args.pvk), password)
        instance.reevaluate()
    _Out(config).emit(f"certificate {cert.name} restored",
                      {"ok": True, "name": cert.name, "thumbprint": cert.thumbprint.hex()})
    return 0


def cmd_cipher(config: CliConfig, args) -> int:
    if args.mode == "shift":
        fn = cipherlab.shift_decrypt if args.decrypt else cipherlab.shift_encrypt
        result = fn(args.text, args.key)
    else:
        result = cipherlab.reverse_cipher(args.text)
    _Out(config).emit(result, {"ok": True, "result": result})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdestore", description="Encrypted page store")
    parser.add_argument("--data-dir", default="./tde-data", help="instance directory")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("init").set_defaults(func=cmd_init)
    p = sub.add_parser("run")
    p.add_argument("script")
    p.set_defaults(func=cmd_run)
    sub.add_parser("status").set_defaults(func=cmd_status)

    p = sub.add_parser("backup-db")
    p.add_argument("name")
    p.add_argument("file")
    p.set_defaults(func=cmd_backup_db)
    p = sub.add_parser("restore-db")
    p.add_argument("file")
    p.set_defaults(func=cmd_restore_db)
    p = sub.add_parser("attach-db")
    p.add_argument("data")
    p.add_argument("log")
    p.set_defaults(func=cmd_attach_db)

    p = sub.add_parser("backup-cert")
    p.add_argument("name")
    p.add_argument("cert")
    p.add_argument("pvk")
    p.add_argument("--password")
    p.set_defaults(func=cmd_backup_cert)
    p = sub.add_parser("restore-cert")
    p.add_argument("cert")
    p.add_argument("pvk")
    p.add_argument("--password")
    p.set_defaults(func=cmd_restore_cert)

    p = sub.add_parser("cipher")
    p.add_argument("mode", choices=["shift", "reverse"])
    p.add_argument("text")
    p.add_argument("--key", type=int, default=3)
    p.add_argument("--decrypt", action="store_true")
    p.set_defaults(func=cmd_cipher)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = CliConfig(Path(args.data_dir).absolute(), json=args.json)
    try:
        return args.func(config, args)
    except errors.TDEError as exc:
        return _Out(config).error(exc)


if __name__ == "__main__":
    sys.exit(main())
