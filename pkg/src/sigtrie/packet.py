"""Packets at the 5-tuple + payload level, and their JSON Lines file format."""

from __future__ import annotations

import base64
import binascii
import ipaddress
import json
from dataclasses import dataclass, field
from typing import Iterable, Union

from .rules import MATCH_PROTOCOLS, Protocol

MAX_PAYLOAD = 65535

Address = Union[str, int, ipaddress.IPv4Address]


@dataclass(frozen=True)
class Packet:
    protocol: Protocol
    src_ip: ipaddress.IPv4Address
    src_port: int
    dst_ip: ipaddress.IPv4Address
    dst_port: int
    payload: bytes = b""
    # integer forms of the addresses, used by the matchers
    src: int = field(init=False, repr=False, compare=False)
    dst: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.protocol not in MATCH_PROTOCOLS:
            raise ValueError(f"packets must be tcp, udp or icmp, not {self.protocol.value}")
        object.__setattr__(self, "src_ip", ipaddress.IPv4Address(self.src_ip))
        object.__setattr__(self, "dst_ip", ipaddress.IPv4Address(self.dst_ip))
        for name in ("src_port", "dst_port"):
            port = getattr(self, name)
            if not 0 <= port <= 65535:
                raise ValueError(f"{name} {port} out of range 0..65535")
            if self.protocol is Protocol.ICMP and port != 0:
                raise ValueError("icmp packets carry no ports")
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError(f"payload longer than {MAX_PAYLOAD} bytes")
        object.__setattr__(self, "payload", bytes(self.payload))
        object.__setattr__(self, "src", int(self.src_ip))
        object.__setattr__(self, "dst", int(self.dst_ip))

    def to_json(self) -> dict:
        return {
            "proto": self.protocol.value,
            "src_ip": str(self.src_ip),
            "src_port": self.src_port,
            "dst_ip": str(self.dst_ip),
            "dst_port": self.dst_port,
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Packet":
        try:
            protocol = Protocol(str(obj["proto"]).lower())
        except ValueError:
            raise ValueError(f"unknown protocol {obj['proto']!r}") from None
        try:
            payload = base64.b64decode(obj.get("payload_b64", ""), validate=True)
        except (binascii.Error, TypeError):
            raise ValueError("payload_b64 is not valid base64") from None
        ports = []
        for name in ("src_port", "dst_port"):
            value = obj.get(name, 0)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer")
            ports.append(value)
        return cls(protocol, obj["src_ip"], ports[0], obj["dst_ip"], ports[1], payload)


@dataclass(frozen=True)
class PacketLineError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


def read_packets_jsonl(text: str) -> tuple[list[Packet], list[PacketLineError]]:
    packets: list[Packet] = []
    errors: list[PacketLineError] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("expected a JSON object")
            packets.append(Packet.from_json(obj))
        except KeyError as exc:
            errors.append(PacketLineError(lineno, f"missing field {exc.args[0]}"))
        except ValueError as exc:
            errors.append(PacketLineError(lineno, str(exc)))
    return packets, errors


def write_packets_jsonl(packets: Iterable[Packet]) -> str:
    return "".join(json.dumps(p.to_json(), separators=(",", ":")) + "\n" for p in packets)
