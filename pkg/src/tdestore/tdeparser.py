"""Tokenizer and recursive-descent parser for the encryption DDL dialect.

The grammar is closed; anything outside it is a syntax error::

    script      := batch ( GO-line batch )*
    batch       := ( statement [ ';' ] )*
    statement   := USE name
                 | CREATE DATABASE name ON '(' filespec ')' LOG ON '(' filespec ')'
                 | CREATE DATABASE ENCRYPTION KEY WITH ALGORITHM '=' name
                       ENCRYPTION BY SERVER CERTIFICATE name
                 | CREATE MASTER KEY ENCRYPTION BY PASSWORD '=' string
                 | CREATE CERTIFICATE name WITH SUBJECT '=' string
                 | ALTER DATABASE name SET ENCRYPTION ( ON | OFF )
                 | ALTER CERTIFICATE name WITH PRIVATE KEY
                       '(' ENCRYPTION BY PASSWORD '=' string ')'
                 | BACKUP CERTIFICATE name TO FILE '=' string WITH PRIVATE KEY
                       '(' FILE '=' string ',' ENCRYPTION BY PASSWORD '=' string ')'
                 | RESTORE CERTIFICATE FROM FILE '=' string WITH PRIVATE KEY
                       '(' FILE '=' string ',' DECRYPTION BY PASSWORD '=' string ')'
                 | BACKUP DATABASE name TO DISK '=' string
                 | RESTORE DATABASE FROM DISK '=' string
                 | ATTACH DATABASE FILE '=' string LOG FILE '=' string
    filespec    := option ( ',' option )*      -- NAME, FILENAME, SIZE, MAXSIZE, FILEGROWTH
    size        := number [ KB | MB | GB ]

Keywords are case-insensitive. ``--`` and ``/* */`` are comments. A string
literal that wraps onto another line has the line break and the indentation
around it folded into a single space.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from enum import Enum

from . import errors
from .pager import SizeSpec, SizeUnit

KEYWORDS = frozenset("""
    USE CREATE ALTER BACKUP RESTORE ATTACH DATABASE ON OFF LOG NAME FILENAME SIZE
    MAXSIZE FILEGROWTH KB MB GB MASTER KEY ENCRYPTION DECRYPTION BY PASSWORD
    CERTIFICATE WITH SUBJECT ALGORITHM SERVER SET PRIVATE TO FROM FILE DISK
""".split())

# Keywords that can never stand in for a name.
RESERVED = frozenset("""
    USE CREATE ALTER BACKUP RESTORE ATTACH DATABASE ON OFF LOG SET WITH BY TO FROM ENCRYPTION
""".split())

_GO_LINE = re.compile(r"^\s*go\s*$", re.IGNORECASE)
_WORD = re.compile(r"[A-Za-z_@#][A-Za-z0-9_@#$]*")
_NUMBER = re.compile(r"[0-9]+")
_PUNCT = set("=(),;")


class TokenKind(str, Enum):
    KEYWORD = "Keyword"
    IDENTIFIER = "Identifier"
    NUMBER = "Number"
    STRING = "SingleQuotedString"
    PUNCT = "Punct"
    EOF = "EOF"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int
    column: int

    @property
    def upper(self) -> str:
        return self.text.upper()

    def describe(self) -> str:
        if self.kind == TokenKind.EOF:
            return "end of input"
        if self.kind == TokenKind.STRING:
            return "string literal"
        return f"{self.kind.value.lower()} {self.text!r}"


def _fold_string(raw: str) -> str:
    return re.sub(r"[ \t]*\r?\n[ \t]*", " ", raw)


def tokenize(script: str, *, line_offset: int = 0) -> list[Token]:
    """Split ``script`` into tokens. No EOF token is appended."""
    tokens: list[Token] = []
    i, n = 0, len(script)
    line, line_start = 1 + line_offset, 0
    while i < n:
        ch = script[i]
        col = i - line_start + 1
        if ch == "\n":
            i += 1
            line, line_start = line + 1, i
        elif ch.isspace():
            i += 1
        elif script.startswith("--", i):
            while i < n and script[i] != "\n":
                i += 1
        elif script.startswith("/*", i):
            end = script.find("*/", i + 2)
            stop = n if end < 0 else end + 2
            for j in range(i, stop):
                if script[j] == "\n":
                    line, line_start = line + 1, j + 1
            i = stop
        elif ch == "'":
            start_line, start_col = line, col
            j, buf = i + 1, []
            while True:
                if j >= n:
                    raise errors.UnterminatedString(start_line, start_col)
                if script[j] == "'":
                    if j + 1 < n and script[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                if script[j] == "\n":
                    line, line_start = line + 1, j + 1
                buf.append(script[j])
                j += 1
            tokens.append(Token(TokenKind.STRING, _fold_string("".join(buf)), start_line, start_col))
            i = j + 1
        elif ch.isdigit():
            m = _NUMBER.match(script, i)
            tokens.append(Token(TokenKind.NUMBER, m.group(), line, col))
            i = m.end()
        elif ch == "[":
            end = script.find("]", i)
            if end < 0 or "\n" in script[i:end]:
                raise errors.DDLSyntaxError("']'", "end of line", line, col)
            tokens.append(Token(TokenKind.IDENTIFIER, script[i + 1:end], line, col))
            i = end + 1
        elif _WORD.match(script, i):
            m = _WORD.match(script, i)
            word = m.group()
            kind = TokenKind.KEYWORD if word.upper() in KEYWORDS else TokenKind.IDENTIFIER
            tokens.append(Token(kind, word, line, col))
            i = m.end()
        elif ch in _PUNCT:
            tokens.append(Token(TokenKind.PUNCT, ch, line, col))
            i += 1
        else:
            raise errors.DDLSyntaxError("a token", repr(ch), line, col)
    return tokens


def _split_with_lines(script: str) -> list[tuple[int, str]]:
    batches: list[tuple[int, str]] = []
    current: list[str] = []
    start = 0
    for idx, text in enumerate(script.splitlines(keepends=True)):
        if _GO_LINE.match(text):
            if "".join(current).strip():
                batches.append((start, "".join(current)))
            current, start = [], idx + 1
        else:
            current.append(text)
    if "".join(current).strip():
        batches.append((start, "".join(current)))
    return batches


def split_batches(script: str) -> list[str]:
    """Split on lines holding only ``GO`` (any case); empty batches are dropped."""
    return [text for _, text in _split_with_lines(script)]


# -- AST -------------------------------------------------------------------

@dataclass
class FileSpec:
    logical_name: str
    filename: str
    size: SizeSpec
    maxsize: SizeSpec
    filegrowth: SizeSpec


@dataclass
class Statement:
    line: int = field(default=0, compare=False, kw_only=True)

    @property
    def kind(self) -> str:
        return type(self).__name__


@dataclass
class Use(Statement):
    db: str


@dataclass
class CreateDatabase(Statement):
    name: str
    data_file: FileSpec
    log_file: FileSpec


@dataclass
class CreateMasterKey(Statement):
    password: str = field(repr=False)


@dataclass
class CreateCertificate(Statement):
    name: str
    subject: str


@dataclass
class CreateDatabaseEncryptionKey(Statement):
    algorithm: str
    certificate: str


@dataclass
class AlterDatabaseSetEncryption(Statement):
    db: str
    on: bool


@dataclass
class BackupCertificate(Statement):
    name: str
    cert_file: str
    pk_file: str
    password: str = field(repr=False)


@dataclass
class RestoreCertificate(Statement):
    cert_file: str
    pk_file: str
    password: str = field(repr=False)


@dataclass
class AlterCertificatePassword(Statement):
    name: str
    password: str = field(repr=False)


@dataclass
class BackupDatabase(Statement):
    db: str
    to_file: str


@dataclass
class RestoreDatabase(Statement):
    from_file: str


@dataclass
class AttachDatabase(Statement):
    data_file: str
    log_file: str


@dataclass
class Batch:
    statements: list[Statement]
    line: int = 1


# -- parser ----------------------------------------------------------------

class Parser:
    """Recursive-descent parser over the tokens of one batch."""

    def __init__(self, tokens: list[Token], end_line: int = 1, end_column: int = 1):
        self.tokens = tokens
        self.pos = 0
        self._eof = Token(TokenKind.EOF, "", end_line, end_column)

    # -- token helpers -----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        idx = self.pos + ahead
        return self.tokens[idx] if idx < len(self.tokens) else self._eof

    def advance(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def fail(self, expected: str):
        tok = self.peek()
        raise errors.DDLSyntaxError(expected, tok.describe(), tok.line, tok.column)

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == TokenKind.KEYWORD and tok.upper in words

    def keyword(self, *words: str) -> str:
        if not self.at_keyword(*words):
            self.fail(" or ".join(words))
        return self.advance().upper

    def punct(self, ch: str) -> None:
        tok = self.peek()
        if tok.kind != TokenKind.PUNCT or tok.text != ch:
            self.fail(repr(ch))
        self.advance()

    def name(self) -> str:
        tok = self.peek()
        if tok.kind == TokenKind.IDENTIFIER or (
                tok.kind == TokenKind.KEYWORD and tok.upper not in RESERVED):
            return self.advance().text
        self.fail("identifier")

    def string(self) -> str:
        tok = self.peek()
        if tok.kind != TokenKind.STRING:
            self.fail("string literal")
        return self.advance().text

    def assign_string(self) -> str:
        self.punct("=")
        return self.string()

    def size(self) -> SizeSpec:
        tok = self.peek()
        if tok.kind != TokenKind.NUMBER:
            self.fail("number")
        self.advance()
        value = int(tok.text)
        if value <= 0:
            raise errors.DDLSyntaxError("positive size", tok.text, tok.line, tok.column)
        unit = SizeUnit.MB
        if self.at_keyword("KB", "MB", "GB"):
            unit = SizeUnit(self.advance().upper)
        return SizeSpec(value, unit)

    # -- grammar -----------------------------------------------------------

    def parse_batch(self) -> list[Statement]:
        statements = []
        while self.peek().kind != TokenKind.EOF:
            if self.peek().kind == TokenKind.PUNCT and self.peek().text == ";":
                self.advance()
                continue
            statements.append(self.statement())
        return statements

    def statement(self) -> Statement:
        tok = self.peek()
        lead = self.keyword("USE", "CREATE", "ALTER", "BACKUP", "RESTORE", "ATTACH")
        stmt = getattr(self, f"_{lead.lower()}")()
        stmt.line = tok.line
        return stmt

    def _use(self) -> Statement:
        return Use(self.name())

    def _create(self) -> Statement:
        what = self.keyword("DATABASE", "MASTER", "CERTIFICATE")
        if what == "MASTER":
            self.keyword("KEY")
            self.keyword("ENCRYPTION")
            self.keyword("BY")
            self.keyword("PASSWORD")
            return CreateMasterKey(self.assign_string())
        if what == "CERTIFICATE":
            name = self.name()
            self.keyword("WITH")
            self.keyword("SUBJECT")
            return CreateCertificate(name, self.assign_string())
        if self.at_keyword("ENCRYPTION"):
            self.advance()
            self.keyword("KEY")
            self.keyword("WITH")
            self.keyword("ALGORITHM")
            self.punct("=")
            algorithm = self.name()
            self.keyword("ENCRYPTION")
            self.keyword("BY")
            self.keyword("SERVER")
            self.keyword("CERTIFICATE")
            return CreateDatabaseEncryptionKey(algorithm, self.name())
        name = self.name()
        self.keyword("ON")
        data_file = self.filespec()
        self.keyword("LOG")
        self.keyword("ON")
        return CreateDatabase(name, data_file, self.filespec())

    def filespec(self) -> FileSpec:
        self.punct("(")
        options: dict[str, object] = {}
        while True:
            tok = self.peek()
            opt = self.keyword("NAME", "FILENAME", "SIZE", "MAXSIZE", "FILEGROWTH")
            if opt in options:
                raise errors.DDLSyntaxError("a distinct file option", f"repeated {opt}",
                                            tok.line, tok.column)
            if opt == "NAME":
                self.punct("=")
                options[opt] = self.name()
            elif opt == "FILENAME":
                options[opt] = self.assign_string()
            else:
                self.punct("=")
                options[opt] = self.size()
            if self.peek().kind == TokenKind.PUNCT and self.peek().text == ",":
                self.advance()
                continue
            break
        missing = [o for o in ("NAME", "FILENAME", "SIZE", "MAXSIZE", "FILEGROWTH")
                   if o not in options]
        if missing:
            self.fail(missing[0])
        self.punct(")")
        return FileSpec(options["NAME"], options["FILENAME"], options["SIZE"],
                        options["MAXSIZE"], options["FILEGROWTH"])

    def _alter(self) -> Statement:
        what = self.keyword("DATABASE", "CERTIFICATE")
        name = self.name()
        if what == "DATABASE":
            self.keyword("SET")
            self.keyword("ENCRYPTION")
            return AlterDatabaseSetEncryption(name, self.keyword("ON", "OFF") == "ON")
        self.keyword("WITH")
        self.keyword("PRIVATE")
        self.keyword("KEY")
        self.punct("(")
        self.keyword("ENCRYPTION")
        self.keyword("BY")
        self.keyword("PASSWORD")
        password = self.assign_string()
        self.punct(")")
        return AlterCertificatePassword(name, password)

    def _private_key_clause(self, direction: str) -> tuple[str, str]:
        self.keyword("WITH")
        self.keyword("PRIVATE")
        self.keyword("KEY")
        self.punct("(")
        self.keyword("FILE")
        pk_file = self.assign_string()
        self.punct(",")
        self.keyword(direction)
        self.keyword("BY")
        self.keyword("PASSWORD")
        password = self.assign_string()
        self.punct(")")
        return pk_file, password

    def _backup(self) -> Statement:
        what = self.keyword("CERTIFICATE", "DATABASE")
        name = self.name()
        self.keyword("TO")
        if what == "DATABASE":
            self.keyword("DISK")
            return BackupDatabase(name, self.assign_string())
        self.keyword("FILE")
        cert_file = self.assign_string()
        pk_file, password = self._private_key_clause("ENCRYPTION")
        return BackupCertificate(name, cert_file, pk_file, password)

    def _restore(self) -> Statement:
        what = self.keyword("CERTIFICATE", "DATABASE")
        self.keyword("FROM")
        if what == "DATABASE":
            self.keyword("DISK")
            return RestoreDatabase(self.assign_string())
        self.keyword("FILE")
        cert_file = self.assign_string()
        pk_file, password = self._private_key_clause("DECRYPTION")
        return RestoreCertificate(cert_file, pk_file, password)

    def _attach(self) -> Statement:
        self.keyword("DATABASE")
        self.keyword("FILE")
        data_file = self.assign_string()
        self.keyword("LOG")
        self.keyword("FILE")
        return AttachDatabase(data_file, self.assign_string())


def _end_position(text: str, line_offset: int) -> tuple[int, int]:
    lines = text.split("\n")
    # Trailing blank lines are not a useful place to point at.
    while len(lines) > 1 and not lines[-1].strip():
        lines.pop()
    return line_offset + len(lines), len(lines[-1].rstrip("\r")) + 1


def parse_batch(text: str, *, line_offset: int = 0) -> Batch:
    tokens = tokenize(text, line_offset=line_offset)
    end_line, end_col = _end_position(text, line_offset)
    return Batch(Parser(tokens, end_line, end_col).parse_batch(), line=line_offset + 1)


def parse_script(script: str) -> list[Batch]:
    """Parse every batch of a script; raises on the first syntax error."""
    return [parse_batch(text, line_offset=start) for start, text in _split_with_lines(script)]


def parse_statement(text: str) -> Statement:
    statements = parse_batch(text).statements
    if len(statements) != 1:
        raise errors.DDLSyntaxError("exactly one statement", f"{len(statements)} statements", 1, 1)
    return statements[0]


# -- printing --------------------------------------------------------------

def _q(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


def _n(name: str) -> str:
    if _WORD.fullmatch(name) and name.upper() not in RESERVED:
        return name
    return f"[{name}]"


def _filespec(fs: FileSpec) -> str:
    return (f"( NAME = {_n(fs.logical_name)}, FILENAME = {_q(fs.filename)}, SIZE = {fs.size}, "
            f"MAXSIZE = {fs.maxsize}, FILEGROWTH = {fs.filegrowth} )")


def format_statement(stmt: Statement) -> str:
    """Render a statement back to canonical DDL text."""
    match stmt:
        case Use(db=db):
            return f"USE {_n(db)};"
        case CreateDatabase():
            return (f"CREATE DATABASE {_n(stmt.name)} ON {_filespec(stmt.data_file)} "
                    f"LOG ON {_filespec(stmt.log_file)};")
        case CreateMasterKey():
            return f"CREATE MASTER KEY ENCRYPTION BY PASSWORD = {_q(stmt.password)};"
        case CreateCertificate():
            return f"CREATE CERTIFICATE {_n(stmt.name)} WITH SUBJECT = {_q(stmt.subject)};"
        case CreateDatabaseEncryptionKey():
            return (f"CREATE DATABASE ENCRYPTION KEY WITH ALGORITHM = {_n(stmt.algorithm)} "
                    f"ENCRYPTION BY SERVER CERTIFICATE {_n(stmt.certificate)};")
        case AlterDatabaseSetEncryption():
            return f"ALTER DATABASE {_n(stmt.db)} SET ENCRYPTION {'ON' if stmt.on else 'OFF'};"
        case AlterCertificatePassword():
            return (f"ALTER CERTIFICATE {_n(stmt.name)} WITH PRIVATE KEY "
                    f"( ENCRYPTION BY PASSWORD = {_q(stmt.password)} );")
        case BackupCertificate():
            return (f"BACKUP CERTIFICATE {_n(stmt.name)} TO FILE = {_q(stmt.cert_file)} "
                    f"WITH PRIVATE KEY ( FILE = {_q(stmt.pk_file)}, "
                    f"ENCRYPTION BY PASSWORD = {_q(stmt.password)} );")
        case RestoreCertificate():
            return (f"RESTORE CERTIFICATE FROM FILE = {_q(stmt.cert_file)} "
                    f"WITH PRIVATE KEY ( FILE = {_q(stmt.pk_file)}, "
                    f"DECRYPTION BY PASSWORD = {_q(stmt.password)} );")
        case BackupDatabase():
            return f"BACKUP DATABASE {_n(stmt.db)} TO DISK = {_q(stmt.to_file)};"
        case RestoreDatabase():
            return f"RESTORE DATABASE FROM DISK = {_q(stmt.from_file)};"
        case AttachDatabase():
            return f"ATTACH DATABASE FILE = {_q(stmt.data_file)} LOG FILE = {_q(stmt.log_file)};"
    raise TypeError(f"cannot format {stmt!r}")


def format_script(batches: list[Batch]) -> str:
    return "".join("\n".join(format_statement(s) for s in b.statements) + "\nGO\n"
                   for b in batches)


def to_dict(node) -> object:
    """JSON-ready structure for an AST node; source lines are omitted."""
    if isinstance(node, Batch):
        return [to_dict(s) for s in node.statements]
    if isinstance(node, list):
        return [to_dict(n) for n in node]
    if isinstance(node, SizeSpec):
        return {"value": node.value, "unit": node.unit.value}
    if isinstance(node, (Statement, FileSpec)):
        out: dict[str, object] = {"kind": type(node).__name__} if isinstance(node, Statement) else {}
        for f in fields(node):
            if f.name != "line":
                out[f.name] = to_dict(getattr(node, f.name))
        return out
    return node
