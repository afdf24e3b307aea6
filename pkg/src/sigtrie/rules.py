"""Rule model and a parser/serializer for a strict subset of Snort 2.8 syntax.

Only the fields that matter for curation and header/content matching are
modelled.  Anything else inside the option block is kept verbatim in
``Rule.raw_options`` so that nothing is silently dropped.
"""

from __future__ import annotations

import enum
import ipaddress
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union


class Action(enum.Enum):
    ALERT = "alert"
    DROP = "drop"
    LOG = "log"
    PASS = "pass"


# "accept" is how some engines spell pass
_ACTION_ALIASES = {"accept": Action.PASS}


class Protocol(enum.Enum):
    TCP = "tcp"
    UDP = "udp"
    ICMP = "icmp"
    IP = "ip"


# Protocols that get their own trie; ip rules only take part in curation.
MATCH_PROTOCOLS = (Protocol.TCP, Protocol.UDP, Protocol.ICMP)


# --------------------------------------------------------------------------
# Header specs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IpAny:
    def __str__(self) -> str:
        return "any"


@dataclass(frozen=True)
class HomeNet:
    def __str__(self) -> str:
        return "$HOME_NET"


@dataclass(frozen=True)
class ExternalNet:
    def __str__(self) -> str:
        return "$EXTERNAL_NET"


@dataclass(frozen=True)
class IpAddr:
    addr: ipaddress.IPv4Address
    value: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "value", int(self.addr))

    def __str__(self) -> str:
        return str(self.addr)


@dataclass(frozen=True)
class IpCidr:
    network: ipaddress.IPv4Network
    lo: int = field(init=False, repr=False, compare=False)
    hi: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lo", int(self.network.network_address))
        object.__setattr__(self, "hi", int(self.network.broadcast_address))

    def __str__(self) -> str:
        return str(self.network)


@dataclass(frozen=True)
class IpRange:
    lo_addr: ipaddress.IPv4Address
    hi_addr: ipaddress.IPv4Address
    lo: int = field(init=False, repr=False, compare=False)
    hi: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = int(self.lo_addr), int(self.hi_addr)
        if lo > hi:
            raise ValueError(f"empty ip range {self.lo_addr}-{self.hi_addr}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __str__(self) -> str:
        return f"{self.lo_addr}-{self.hi_addr}"


IpSpec = Union[IpAny, HomeNet, ExternalNet, IpAddr, IpCidr, IpRange]


@dataclass(frozen=True)
class PortAny:
    def __str__(self) -> str:
        return "any"


@dataclass(frozen=True)
class PortNamed:
    name: str

    def __str__(self) -> str:
        return f"${self.name}"


@dataclass(frozen=True)
class PortSingle:
    port: int

    def __post_init__(self):
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port}")

    def __str__(self) -> str:
        return str(self.port)


@dataclass(frozen=True)
class PortRange:
    lo: int
    hi: int

    def __post_init__(self):
        if not (0 <= self.lo <= self.hi <= 65535):
            raise ValueError(f"bad port range {self.lo}:{self.hi}")

    def __str__(self) -> str:
        return f"{self.lo}:{self.hi}"


PortSpec = Union[PortAny, PortNamed, PortSingle, PortRange]


# --------------------------------------------------------------------------
# Options
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ContentSpec:
    """One ``content``/``uricontent`` option plus its modifiers.

    ``offset``/``depth`` are only legal on the first content of a rule and
    ``distance``/``within`` only on the following ones.
    """

    pattern: bytes
    nocase: bool = False
    is_uri: bool = False
    offset: Optional[int] = None
    depth: Optional[int] = None
    distance: Optional[int] = None
    within: Optional[int] = None
    # lowercase copy for nocase search
    folded: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.pattern:
            raise ValueError("content pattern must be non-empty")
        if self.offset is not None and self.offset < 0:
            raise ValueError("offset must be non-negative")
        if self.depth is not None and self.depth <= 0:
            raise ValueError("depth must be positive")
        if self.within is not None and self.within <= 0:
            raise ValueError("within must be positive")
        object.__setattr__(self, "folded", self.pattern.lower())

    @property
    def is_relative(self) -> bool:
        return self.distance is not None or self.within is not None

    @property
    def is_absolute(self) -> bool:
        return self.offset is not None or self.depth is not None


KNOWN_SCHEMES = ("cve", "bugtraq", "nessus", "url")

_CVE_RE = re.compile(r"^(?:CVE-)?(\d{4})-(\d+)$", re.IGNORECASE)
CVE_ID_RE = re.compile(r"^CVE-(\d{4})-(\d+)$")


@dataclass(frozen=True)
class Reference:
    """A ``reference:scheme,id`` option.

    Any scheme outside :data:`KNOWN_SCHEMES` is kept as-is (the "other"
    case).  CVE ids are stored without the ``CVE-`` prefix, as Snort writes
    them.
    """

    scheme: str
    id: str

    def __post_init__(self):
        if self.scheme == "cve" and not _CVE_RE.match(self.id):
            raise ValueError(f"malformed CVE reference: {self.id!r}")

    @property
    def cve_id(self) -> Optional[str]:
        if self.scheme != "cve":
            return None
        m = _CVE_RE.match(self.id)
        return f"CVE-{m.group(1)}-{m.group(2)}"

    @property
    def year(self) -> Optional[int]:
        """Year embedded in a CVE id; other schemes carry no date."""
        if self.scheme != "cve":
            return None
        return int(_CVE_RE.match(self.id).group(1))


@dataclass(frozen=True)
class Rule:
    action: Action
    protocol: Protocol
    src_ip: IpSpec
    src_port: PortSpec
    dst_ip: IpSpec
    dst_port: PortSpec
    sid: int
    msg: str = ""
    contents: tuple[ContentSpec, ...] = ()
    flow: Optional[str] = None
    metadata: tuple[tuple[str, str], ...] = ()
    references: tuple[Reference, ...] = ()
    rev: Optional[int] = None
    raw_options: tuple[tuple[str, Optional[str]], ...] = ()

    def __post_init__(self):
        if self.sid <= 0:
            raise ValueError("sid must be positive")
        if self.rev is not None and self.rev <= 0:
            raise ValueError("rev must be positive")
        for i, c in enumerate(self.contents):
            if i == 0 and c.is_relative:
                raise ValueError("distance/within on the first content")
            if i > 0 and c.is_absolute:
                raise ValueError(f"offset/depth on content {i}")

    def __str__(self) -> str:
        return serialize_rule(self)


class DiagnosticKind(enum.Enum):
    SYNTAX = "Syntax"
    UNKNOWN_ACTION = "UnknownAction"
    BAD_IP_SPEC = "BadIpSpec"
    BAD_PORT_SPEC = "BadPortSpec"
    BAD_CONTENT_ESCAPE = "BadContentEscape"
    MISSING_SID = "MissingSid"
    DUPLICATE_SID = "DuplicateSid"


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    kind: DiagnosticKind
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.kind.value}: {self.message}"


class RuleSyntaxError(ValueError):
    """Raised internally; converted to a ParseDiagnostic at the API edge."""

    def __init__(self, kind: DiagnosticKind, message: str, column: int = 1):
        super().__init__(message)
        self.kind = kind
        self.column = column


# --------------------------------------------------------------------------
# Content byte escapes
# --------------------------------------------------------------------------

_HEX = "0123456789abcdefABCDEF"
# bytes that must never appear literally inside a quoted content
_SPECIAL = frozenset(b'"\\;|')


def decode_pattern(text: str) -> bytes:
    """Decode a quoted-content body (quotes removed) into bytes.

    ``|41 42|`` hex runs and ``\\"``, ``\\\\``, ``\\;``, ``\\:`` backslash
    escapes are recognised; literal characters must be printable ASCII.
    """
    out = bytearray()
    i, n = 0, len(text)
    in_hex = False
    nibble = None
    while i < n:
        ch = text[i]
        if in_hex:
            if ch == "|":
                if nibble is not None:
                    raise ValueError(f"odd number of hex digits before column {i}")
                in_hex = False
            elif ch == " ":
                if nibble is not None:
                    raise ValueError(f"split hex byte at column {i}")
            elif ch in _HEX:
                if nibble is None:
                    nibble = ch
                else:
                    out.append(int(nibble + ch, 16))
                    nibble = None
            else:
                raise ValueError(f"bad hex digit {ch!r} at column {i}")
        elif ch == "|":
            in_hex = True
        elif ch == "\\":
            if i + 1 >= n or text[i + 1] not in '"\\;:':
                raise ValueError(f"bad backslash escape at column {i}")
            out.append(ord(text[i + 1]))
            i += 1
        elif ch == '"' or ch == ";":
            raise ValueError(f"unescaped {ch!r} at column {i}")
        elif " " <= ch <= "~":
            out.append(ord(ch))
        else:
            raise ValueError(f"non-printable character {ch!r} must use |hex| escape")
        i += 1
    if in_hex:
        raise ValueError("unterminated |hex| run")
    return bytes(out)


def encode_pattern(data: bytes) -> str:
    """Inverse of :func:`decode_pattern`; unsafe bytes become ``|xx xx|`` runs."""
    parts: list[str] = []
    run: list[str] = []
    for b in data:
        if 0x20 <= b <= 0x7E and b not in _SPECIAL:
            if run:
                parts.append("|" + " ".join(run) + "|")
                run = []
            parts.append(chr(b))
        else:
            run.append(f"{b:02X}")
    if run:
        parts.append("|" + " ".join(run) + "|")
    return "".join(parts)


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace(";", "\\;") + '"'


def _unquote(value: str) -> str:
    if len(value) < 2 or value[0] != '"' or value[-1] != '"':
        raise ValueError("expected a quoted string")
    body = value[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(body[i + 1])
            i += 2
            continue
        if ch == '"':
            raise ValueError("unescaped quote inside string")
        out.append(ch)
        i += 1
    return "".join(out)


# --------------------------------------------------------------------------
# Header parsing
# --------------------------------------------------------------------------

_IP_VARS = {
    "$HOME_NET": HomeNet,
    "$HOME_NETWORK": HomeNet,
    "$EXTERNAL_NET": ExternalNet,
    "$EXTERNAL_NETWORK": ExternalNet,
}
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def parse_ip_spec(token: str) -> IpSpec:
    if token.lower() == "any":
        return IpAny()
    if token.upper() in _IP_VARS:
        return _IP_VARS[token.upper()]()
    if token.startswith(("!", "[")):
        raise ValueError("negated addresses and address lists are not supported")
    if "/" in token:
        # strict=True rejects host bits below the prefix
        return IpCidr(ipaddress.IPv4Network(token, strict=True))
    if "-" in token:
        lo, _, hi = token.partition("-")
        return IpRange(ipaddress.IPv4Address(lo), ipaddress.IPv4Address(hi))
    if token.startswith("$"):
        raise ValueError(f"unknown address variable {token}")
    return IpAddr(ipaddress.IPv4Address(token))


def _port_number(text: str) -> int:
    if not text.isdigit():
        raise ValueError(f"bad port {text!r}")
    value = int(text)
    if value > 65535:
        raise ValueError(f"port out of range: {value}")
    return value


def parse_port_spec(token: str) -> PortSpec:
    if token.lower() == "any":
        return PortAny()
    if token.startswith(("!", "[")):
        raise ValueError("negated ports and port lists are not supported")
    if token.startswith("$"):
        name = token[1:]
        if not _NAME_RE.match(name):
            raise ValueError(f"bad port variable {token!r}")
        return PortNamed(name)
    if ":" in token:
        lo, _, hi = token.partition(":")
        return PortRange(_port_number(lo) if lo else 0, _port_number(hi) if hi else 65535)
    return PortSingle(_port_number(token))


# --------------------------------------------------------------------------
# Option parsing
# --------------------------------------------------------------------------

_HEADER_RE = re.compile(
    r"^\s*(?P<action>\S+)\s+(?P<proto>\S+)\s+(?P<src_ip>\S+)\s+(?P<src_port>\S+)"
    r"\s+(?P<dir>\S+)\s+(?P<dst_ip>\S+)\s+(?P<dst_port>\S+)\s*\((?P<options>.*)\)\s*$",
    re.DOTALL,
)

_MODIFIERS = ("nocase", "offset", "depth", "distance", "within")


def split_options(body: str) -> list[tuple[str, Optional[str], int]]:
    """Split an option block into ``(key, value, column)`` triples.

    Semicolons inside quoted strings or after a backslash do not terminate
    an option.
    """
    options = []
    start = 0
    in_quotes = False
    i = 0
    n = len(body)
    while i < n:
        ch = body[i]
        if ch == "\\":
            i += 2
            continue
        if ch == '"':
            in_quotes = not in_quotes
        elif ch == ";" and not in_quotes:
            options.append((body[start:i], start))
            start = i + 1
        i += 1
    if in_quotes:
        raise RuleSyntaxError(DiagnosticKind.SYNTAX, "unterminated quoted string", start + 1)
    if body[start:].strip():
        options.append((body[start:], start))

    result = []
    for chunk, col in options:
        if not chunk.strip():
            continue
        key, sep, value = chunk.partition(":")
        key = key.strip()
        if not key:
            raise RuleSyntaxError(DiagnosticKind.SYNTAX, "empty option name", col + 1)
        result.append((key.lower(), value.strip() if sep else None, col + 1))
    return result


def _int_option(key: str, value: Optional[str], col: int, minimum: int | None = None) -> int:
    try:
        number = int(value or "")
    except ValueError:
        raise RuleSyntaxError(DiagnosticKind.SYNTAX, f"{key} expects an integer", col) from None
    if minimum is not None and number < minimum:
        raise RuleSyntaxError(DiagnosticKind.SYNTAX, f"{key} must be >= {minimum}", col)
    return number


def _parse_content(value: Optional[str], col: int) -> bytes:
    if not value or value.startswith("!"):
        raise RuleSyntaxError(DiagnosticKind.SYNTAX, "negated or empty content", col)
    if len(value) < 2 or value[0] != '"' or value[-1] != '"':
        raise RuleSyntaxError(DiagnosticKind.SYNTAX, "content must be quoted", col)
    try:
        pattern = decode_pattern(value[1:-1])
    except ValueError as exc:
        raise RuleSyntaxError(DiagnosticKind.BAD_CONTENT_ESCAPE, str(exc), col) from None
    if not pattern:
        raise RuleSyntaxError(DiagnosticKind.BAD_CONTENT_ESCAPE, "empty content", col)
    return pattern


def _build_contents(pending: list[dict], col: int) -> tuple[ContentSpec, ...]:
    contents = []
    for i, fields in enumerate(pending):
        c = ContentSpec(**fields)
        if i == 0 and c.is_relative:
            raise RuleSyntaxError(DiagnosticKind.SYNTAX, "distance/within on the first content", col)
        if i > 0 and c.is_absolute:
            raise RuleSyntaxError(DiagnosticKind.SYNTAX, "offset/depth only allowed on the first content", col)
        contents.append(c)
    return tuple(contents)


def _parse_options(body: str, base_col: int) -> dict:
    msg = ""
    flow = None
    sid = None
    rev = None
    metadata: list[tuple[str, str]] = []
    references: list[Reference] = []
    raw: list[tuple[str, Optional[str]]] = []
    pending: list[dict] = []

    try:
        options = split_options(body)
    except RuleSyntaxError as exc:
        exc.column += base_col
        raise

    for key, value, col in options:
        col += base_col
        if key == "msg":
            try:
                msg = _unquote(value or "")
            except ValueError as exc:
                raise RuleSyntaxError(DiagnosticKind.SYNTAX, f"msg: {exc}", col) from None
        elif key in ("content", "uricontent"):
            pending.append({"pattern": _parse_content(value, col), "is_uri": key == "uricontent"})
        elif key in _MODIFIERS:
            if not pending:
                raise RuleSyntaxError(DiagnosticKind.SYNTAX, f"{key} without a preceding content", col)
            current = pending[-1]
            if key in current:
                raise RuleSyntaxError(DiagnosticKind.SYNTAX, f"duplicate {key}", col)
            if key == "nocase":
                if value is not None:
                    raise RuleSyntaxError(DiagnosticKind.SYNTAX, "nocase takes no value", col)
                current["nocase"] = True
            elif key == "offset":
                current[key] = _int_option(key, value, col, minimum=0)
            elif key == "distance":
                current[key] = _int_option(key, value, col)
            else:
                current[key] = _int_option(key, value, col, minimum=1)
        elif key == "flow":
            flow = value or ""
        elif key == "metadata":
            for entry in (value or "").split(","):
                entry = entry.strip()
                if not entry:
                    continue
                k, _, v = entry.partition(" ")
                metadata.append((k, v.strip()))
        elif key == "reference":
            scheme, sep, ident = (value or "").partition(",")
            scheme = scheme.strip().lower()
            ident = ident.strip()
            if not sep or not scheme or not ident:
                raise RuleSyntaxError(DiagnosticKind.SYNTAX, "reference expects scheme,id", col)
            if scheme == "cve":
                m = _CVE_RE.match(ident)
                if not m:
                    raise RuleSyntaxError(DiagnosticKind.SYNTAX, f"malformed CVE id {ident!r}", col)
                ident = f"{m.group(1)}-{m.group(2)}"
            references.append(Reference(scheme, ident))
        elif key == "sid":
            if sid is not None:
                raise RuleSyntaxError(DiagnosticKind.SYNTAX, "duplicate sid", col)
            sid = _int_option(key, value, col, minimum=1)
        elif key == "rev":
            rev = _int_option(key, value, col, minimum=1)
        else:
            raw.append((key, value))

    if sid is None:
        raise RuleSyntaxError(DiagnosticKind.MISSING_SID, "rule has no sid", base_col)
    return dict(
        msg=msg,
        flow=flow,
        sid=sid,
        rev=rev,
        metadata=tuple(metadata),
        references=tuple(references),
        raw_options=tuple(raw),
        contents=_build_contents(pending, base_col),
    )


def _parse_rule(text: str) -> Rule:
    m = _HEADER_RE.match(text)
    if not m:
        raise RuleSyntaxError(DiagnosticKind.SYNTAX, "expected 'action proto src sport -> dst dport (options)'")

    def col(group: str) -> int:
        return m.start(group) + 1

    action_word = m["action"].lower()
    try:
        action = _ACTION_ALIASES.get(action_word) or Action(action_word)
    except ValueError:
        raise RuleSyntaxError(DiagnosticKind.UNKNOWN_ACTION, f"unknown action {m['action']!r}", col("action")) from None
    try:
        protocol = Protocol(m["proto"].lower())
    except ValueError:
        raise RuleSyntaxError(DiagnosticKind.SYNTAX, f"unknown protocol {m['proto']!r}", col("proto")) from None
    if m["dir"] != "->":
        raise RuleSyntaxError(DiagnosticKind.SYNTAX, f"direction must be '->', got {m['dir']!r}", col("dir"))

    header = {}
    for name, parser, kind in (
        ("src_ip", parse_ip_spec, DiagnosticKind.BAD_IP_SPEC),
        ("src_port", parse_port_spec, DiagnosticKind.BAD_PORT_SPEC),
        ("dst_ip", parse_ip_spec, DiagnosticKind.BAD_IP_SPEC),
        ("dst_port", parse_port_spec, DiagnosticKind.BAD_PORT_SPEC),
    ):
        try:
            header[name] = parser(m[name])
        except ValueError as exc:
            raise RuleSyntaxError(kind, f"{name}: {exc}", col(name)) from None

    options = _parse_options(m["options"], m.start("options"))
    return Rule(action=action, protocol=protocol, **header, **options)


def parse_rule(text: str, line: int = 1) -> Union[Rule, ParseDiagnostic]:
    """Parse one logical rule line into a :class:`Rule`.

    Returns a :class:`ParseDiagnostic` instead of raising when the text is
    rejected.
    """
    try:
        return _parse_rule(text)
    except RuleSyntaxError as exc:
        return ParseDiagnostic(line, exc.column, exc.kind, str(exc))
    except ValueError as exc:
        return ParseDiagnostic(line, 1, DiagnosticKind.SYNTAX, str(exc))


def logical_lines(text: str) -> Iterable[tuple[int, str]]:
    """Yield ``(first_line_number, joined_text)`` with backslash continuations merged."""
    buf: list[str] = []
    start = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.rstrip()
        if not buf:
            start = lineno
        if stripped.endswith("\\"):
            buf.append(stripped[:-1])
            continue
        buf.append(line)
        yield start, "".join(buf)
        buf = []
    if buf:
        yield start, "".join(buf)


def parse_rules_text(text: str) -> tuple[list[Rule], list[ParseDiagnostic]]:
    """Parse a whole ``.rules`` file.

    Comment and blank lines are skipped.  A second rule reusing an sid gets
    a ``DuplicateSid`` diagnostic and the first one is kept.
    """
    rules: list[Rule] = []
    diagnostics: list[ParseDiagnostic] = []
    seen: dict[int, int] = {}
    for lineno, line in logical_lines(text):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        result = parse_rule(line, lineno)
        if isinstance(result, ParseDiagnostic):
            diagnostics.append(result)
        elif result.sid in seen:
            diagnostics.append(
                ParseDiagnostic(
                    lineno, 1, DiagnosticKind.DUPLICATE_SID,
                    f"sid {result.sid} already defined on line {seen[result.sid]}",
                )
            )
        else:
            seen[result.sid] = lineno
            rules.append(result)
    return rules, diagnostics


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def serialize_content(c: ContentSpec) -> str:
    key = "uricontent" if c.is_uri else "content"
    parts = [f'{key}:"{encode_pattern(c.pattern)}";']
    if c.nocase:
        parts.append("nocase;")
    for name in ("offset", "depth", "distance", "within"):
        value = getattr(c, name)
        if value is not None:
            parts.append(f"{name}:{value};")
    return " ".join(parts)


def serialize_reference(ref: Reference) -> str:
    return f"reference:{ref.scheme},{ref.id};"


def serialize_rule(rule: Rule) -> str:
    """Render a rule in canonical option order; ``parse_rule`` inverts it."""
    opts = [f"msg:{_quote(rule.msg)};"]
    if rule.flow is not None:
        opts.append(f"flow:{rule.flow};")
    opts.extend(serialize_content(c) for c in rule.contents)
    if rule.metadata:
        entries = ", ".join(f"{k} {v}" if v else k for k, v in rule.metadata)
        opts.append(f"metadata:{entries};")
    opts.extend(serialize_reference(r) for r in rule.references)
    opts.append(f"sid:{rule.sid};")
    if rule.rev is not None:
        opts.append(f"rev:{rule.rev};")
    for key, value in rule.raw_options:
        opts.append(f"{key};" if value is None else f"{key}:{value};")
    return (
        f"{rule.action.value} {rule.protocol.value} {rule.src_ip} {rule.src_port} -> "
        f"{rule.dst_ip} {rule.dst_port} ({' '.join(opts)})"
    )


def serialize_rules(rules: Iterable[Rule]) -> str:
    return "".join(serialize_rule(r) + "\n" for r in rules)
