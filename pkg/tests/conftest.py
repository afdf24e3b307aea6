import ipaddress

import pytest
from hypothesis import strategies as st

from sigtrie.matching import NetConfig
from sigtrie.rules import (
    Action, ContentSpec, ExternalNet, HomeNet, IpAddr, IpAny, IpCidr, IpRange, PortAny,
    PortNamed, PortRange, PortSingle, Protocol, Reference, Rule,
)
from sigtrie.severity import ingest_feed

GOLDEN = (
    'alert tcp $EXTERNAL_NET any -> $HOME_NET 80 (msg:"xyz"; flow:from_server; '
    'content:"abc"; metadata:IPS-Policy-Drop; reference:cve,2004-0001; sid:9001;)'
)


@pytest.fixture
def net():
    return NetConfig.from_strings(["10.0.0.0/8"], {"HTTP_PORTS": "80", "HIGH": "1024:65535"})


@pytest.fixture
def one_row_store():
    store, errors = ingest_feed("CVE-2004-0001,7.5,2004")
    assert errors == []
    return store


# --- hypothesis strategies -------------------------------------------------

addresses = st.integers(0, 2**32 - 1).map(ipaddress.IPv4Address)


@st.composite
def cidrs(draw):
    prefix = draw(st.integers(0, 32))
    addr = draw(st.integers(0, 2**32 - 1))
    return IpCidr(ipaddress.IPv4Network((addr, prefix), strict=False))


@st.composite
def ip_ranges(draw):
    a, b = sorted(draw(st.lists(st.integers(0, 2**32 - 1), min_size=2, max_size=2)))
    return IpRange(ipaddress.IPv4Address(a), ipaddress.IPv4Address(b))


ip_specs = st.one_of(
    st.just(IpAny()), st.just(HomeNet()), st.just(ExternalNet()),
    addresses.map(IpAddr), cidrs(), ip_ranges(),
)

identifiers = st.from_regex(r"[A-Z_][A-Z0-9_]{0,10}", fullmatch=True)
ports = st.integers(0, 65535)


@st.composite
def port_ranges(draw):
    a, b = sorted(draw(st.lists(ports, min_size=2, max_size=2)))
    return PortRange(a, b)


port_specs = st.one_of(
    st.just(PortAny()), identifiers.map(PortNamed), ports.map(PortSingle), port_ranges(),
)

safe_text = st.text(
    alphabet=st.characters(min_codepoint=0x20, max_codepoint=0x7E), max_size=20
)
# option values that the grammar carries verbatim must not contain separators
verbatim_text = st.from_regex(r"[a-z_][a-z0-9_,.\-]{0,15}", fullmatch=True)


@st.composite
def content_lists(draw):
    n = draw(st.integers(0, 3))
    out = []
    for i in range(n):
        pattern = draw(st.binary(min_size=1, max_size=12))
        kw = {"nocase": draw(st.booleans()), "is_uri": draw(st.booleans())}
        if i == 0:
            kw["offset"] = draw(st.none() | st.integers(0, 50))
            kw["depth"] = draw(st.none() | st.integers(1, 50))
        else:
            kw["distance"] = draw(st.none() | st.integers(-10, 50))
            kw["within"] = draw(st.none() | st.integers(1, 50))
        out.append(ContentSpec(pattern, **kw))
    return tuple(out)


references = st.one_of(
    st.builds(lambda y, n: Reference("cve", f"{y}-{n:04d}"), st.integers(1995, 2030), st.integers(0, 99999)),
    st.builds(Reference, st.sampled_from(["bugtraq", "nessus", "url", "arachnids"]),
              st.from_regex(r"[A-Za-z0-9./_\-]{1,20}", fullmatch=True)),
)

metadata_entries = st.tuples(
    st.from_regex(r"[A-Za-z][A-Za-z0-9_\-]{0,10}", fullmatch=True),
    st.from_regex(r"([a-z0-9][a-z0-9\-]{0,8}( [a-z0-9\-]{1,8})?)?", fullmatch=True),
)

raw_options = st.tuples(
    st.sampled_from(["classtype", "priority", "byte_jump", "fast_pattern", "itype", "flags"]),
    st.none() | verbatim_text,
)


def rules(protocols=st.sampled_from(list(Protocol))):
    return st.builds(
        Rule,
        action=st.sampled_from(list(Action)),
        protocol=protocols,
        src_ip=ip_specs,
        src_port=port_specs,
        dst_ip=ip_specs,
        dst_port=port_specs,
        sid=st.integers(1, 10**9),
        msg=safe_text,
        contents=content_lists(),
        flow=st.none() | verbatim_text,
        metadata=st.lists(metadata_entries, max_size=3).map(tuple),
        references=st.lists(references, max_size=3).map(tuple),
        rev=st.none() | st.integers(1, 1000),
        raw_options=st.lists(raw_options, max_size=3).map(tuple),
    )


# --- acceptance reporting --------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
