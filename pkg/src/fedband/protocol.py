"""Client/server message schema and communication accounting.

Only four message shapes ever cross the client/server boundary, and none of
them may carry per-pull rewards; that restriction is what makes the
raw-observation privacy claim checkable. The ledger counts scalars and
round-trips so the cost of a run can be compared against closed-form
expectations exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Optional

import numpy as np

from .partition import NodeId, sibling


class ProtocolError(ValueError):
    pass


def _as_nodes(nodes) -> tuple[NodeId, ...]:
    out = tuple(sorted(NodeId(int(h), int(i)) for h, i in nodes))
    if len(set(out)) != len(out):
        raise ProtocolError("duplicate nodes in message")
    return out


@dataclass(frozen=True)
class ActiveSetUpload:
    """Client m's candidate set for the next phase."""

    phase: int
    client: int
    nodes: tuple[NodeId, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", _as_nodes(self.nodes))
        if not self.nodes:
            raise ProtocolError("active set upload must be non-empty")
        depths = {n.depth for n in self.nodes}
        if len(depths) != 1:
            raise ProtocolError(f"active set mixes depths {sorted(depths)}")
        if len(self.nodes) % 2 != 0:
            raise ProtocolError(f"active set size {len(self.nodes)} is odd; nodes arrive as sibling pairs")
        for k in range(0, len(self.nodes), 2):
            a, b = self.nodes[k], self.nodes[k + 1]
            if sibling(a) != b:
                raise ProtocolError(f"nodes {tuple(a)} and {tuple(b)} are not siblings")


@dataclass(frozen=True)
class PhaseBroadcast:
    """Server's union active set and per-node sampling budget for one phase."""

    phase: int
    nodes: tuple[NodeId, ...]
    budget: float

    def __post_init__(self):
        object.__setattr__(self, "nodes", _as_nodes(self.nodes))
        if not self.nodes:
            raise ProtocolError("phase broadcast with empty union")
        depths = {n.depth for n in self.nodes}
        if len(depths) != 1:
            raise ProtocolError(f"union set mixes depths {sorted(depths)}")
        if not self.budget > 0:
            raise ProtocolError(f"budget {self.budget} must be positive")

    @property
    def depth(self) -> int:
        return self.nodes[0].depth


@dataclass(frozen=True)
class EstimateUpload:
    """Client m's per-node mean estimates with their sample counts.

    Entries are (node, mean, count); a count is the number of pulls behind the
    mean, never the pulls themselves.
    """

    phase: int
    client: int
    entries: tuple[tuple[NodeId, float, int], ...]

    def __post_init__(self):
        norm = []
        for node, mean, count in self.entries:
            if isinstance(mean, (list, tuple, np.ndarray)):
                raise ProtocolError("estimate mean must be a scalar, not a sequence")
            if int(count) <= 0:
                raise ProtocolError(f"estimate count {count} must be positive")
            norm.append((NodeId(*node), float(mean), int(count)))
        norm.sort(key=lambda e: e[0])
        if len({e[0] for e in norm}) != len(norm):
            raise ProtocolError("duplicate nodes in estimate upload")
        object.__setattr__(self, "entries", tuple(norm))

    def as_dict(self) -> dict[NodeId, tuple[float, int]]:
        return {node: (mean, count) for node, mean, count in self.entries}


@dataclass(frozen=True)
class GlobalEstimateBroadcast:
    """Server's aggregated per-node means for one phase."""

    phase: int
    entries: tuple[tuple[NodeId, float], ...]

    def __post_init__(self):
        norm = sorted((NodeId(*node), float(v)) for node, v in self.entries)
        if len({e[0] for e in norm}) != len(norm):
            raise ProtocolError("duplicate nodes in global broadcast")
        object.__setattr__(self, "entries", tuple(norm))

    def as_dict(self) -> dict[NodeId, float]:
        return dict(self.entries)


UPLOAD_TYPES = (ActiveSetUpload, EstimateUpload)
DOWNLOAD_TYPES = (PhaseBroadcast, GlobalEstimateBroadcast)
MESSAGE_TYPES = UPLOAD_TYPES + DOWNLOAD_TYPES


def scalar_size(message) -> int:
    """Payload size in scalars: 1 per node id, 2 per estimate entry."""
    if isinstance(message, ActiveSetUpload):
        return len(message.nodes)
    if isinstance(message, PhaseBroadcast):
        return len(message.nodes) + 1
    if isinstance(message, EstimateUpload):
        return 2 * len(message.entries)
    if isinstance(message, GlobalEstimateBroadcast):
        return 2 * len(message.entries)
    raise ProtocolError(f"unknown message type {type(message).__name__}")


@dataclass(frozen=True)
class PrivacyViolation:
    reason: str


_EXPECTED_FIELDS = {
    ActiveSetUpload: ("phase", "client", "nodes"),
    PhaseBroadcast: ("phase", "nodes", "budget"),
    EstimateUpload: ("phase", "client", "entries"),
    GlobalEstimateBroadcast: ("phase", "entries"),
}


def validate_privacy(message) -> Optional[PrivacyViolation]:
    """None when the message conforms to the schema; otherwise why it leaks.

    Anything other than the four schema types, any extra field, and any
    sequence-valued payload slot (a smuggled reward list) is a violation.
    """
    t = type(message)
    if t not in _EXPECTED_FIELDS:
        leaky = [
            name
            for name in dir(message)
            if not name.startswith("_") and ("reward" in name.lower() or "sample" in name.lower())
        ]
        hint = f" (carries {', '.join(leaky)})" if leaky else ""
        return PrivacyViolation(f"message type {t.__name__} may not cross the boundary{hint}")
    if is_dataclass(message):
        actual = tuple(f.name for f in fields(message))
        extra = set(actual) - set(_EXPECTED_FIELDS[t])
        if extra:
            return PrivacyViolation(f"unexpected field(s) {sorted(extra)} on {t.__name__}")
    if isinstance(message, EstimateUpload):
        for node, mean, count in message.entries:
            if isinstance(mean, (list, tuple, np.ndarray)) or isinstance(count, (list, tuple, np.ndarray)):
                return PrivacyViolation(
                    f"per-pull sequence in estimate entry for node {tuple(node)}"
                )
    return None


@dataclass
class PhaseComm:
    """Scalar and round-trip counts for one phase."""

    phase: int
    up_scalars: int = 0
    down_scalars: int = 0
    round_trips: int = 0


@dataclass
class CommLedger:
    """Single-writer running account of everything that crossed the boundary."""

    phases: list[PhaseComm] = field(default_factory=list)

    def _slot(self, phase: int) -> PhaseComm:
        if self.phases and self.phases[-1].phase == phase:
            return self.phases[-1]
        if self.phases and phase < self.phases[-1].phase:
            raise ProtocolError(f"phase {phase} already closed (at {self.phases[-1].phase})")
        slot = PhaseComm(phase=phase)
        self.phases.append(slot)
        return slot

    def record_upload(self, message) -> "CommLedger":
        if not isinstance(message, UPLOAD_TYPES):
            raise ProtocolError(f"{type(message).__name__} is not an upload")
        self._slot(message.phase).up_scalars += scalar_size(message)
        return self

    def record_download(self, message) -> "CommLedger":
        if not isinstance(message, DOWNLOAD_TYPES):
            raise ProtocolError(f"{type(message).__name__} is not a download")
        self._slot(message.phase).down_scalars += scalar_size(message)
        return self

    def note_round_trip(self, phase: int) -> "CommLedger":
        self._slot(phase).round_trips += 1
        return self

    @property
    def total_up(self) -> int:
        return sum(p.up_scalars for p in self.phases)

    @property
    def total_down(self) -> int:
        return sum(p.down_scalars for p in self.phases)

    @property
    def total_round_trips(self) -> int:
        return sum(p.round_trips for p in self.phases)

    def totals(self) -> dict:
        return {
            "up_scalars": self.total_up,
            "down_scalars": self.total_down,
            "round_trips": self.total_round_trips,
            "phases": len(self.phases),
        }


def record_upload(ledger: CommLedger, message) -> CommLedger:
    """Count an upload's scalars against its phase; see CommLedger.record_upload."""
    return ledger.record_upload(message)


def record_download(ledger: CommLedger, message) -> CommLedger:
    return ledger.record_download(message)


# Wire format: "<payload length>:<json payload>\n". Field order inside the
# payload is fixed by _EXPECTED_FIELDS so transcripts are byte-stable.


def _node_list(nodes):
    return [[n.depth, n.index] for n in nodes]


def message_to_dict(message) -> dict:
    if isinstance(message, ActiveSetUpload):
        return {"kind": "active_set_upload", "phase": message.phase,
                "client": message.client, "nodes": _node_list(message.nodes)}
    if isinstance(message, PhaseBroadcast):
        return {"kind": "phase_broadcast", "phase": message.phase,
                "nodes": _node_list(message.nodes), "budget": message.budget}
    if isinstance(message, EstimateUpload):
        return {"kind": "estimate_upload", "phase": message.phase, "client": message.client,
                "entries": [[n.depth, n.index, mean, count] for n, mean, count in message.entries]}
    if isinstance(message, GlobalEstimateBroadcast):
        return {"kind": "global_estimate_broadcast", "phase": message.phase,
                "entries": [[n.depth, n.index, v] for n, v in message.entries]}
    raise ProtocolError(f"cannot serialize {type(message).__name__}")


def message_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "active_set_upload":
        return ActiveSetUpload(d["phase"], d["client"], [NodeId(h, i) for h, i in d["nodes"]])
    if kind == "phase_broadcast":
        return PhaseBroadcast(d["phase"], [NodeId(h, i) for h, i in d["nodes"]], d["budget"])
    if kind == "estimate_upload":
        return EstimateUpload(
            d["phase"], d["client"],
            [(NodeId(h, i), mean, count) for h, i, mean, count in d["entries"]],
        )
    if kind == "global_estimate_broadcast":
        return GlobalEstimateBroadcast(
            d["phase"], [(NodeId(h, i), v) for h, i, v in d["entries"]]
        )
    raise ProtocolError(f"unknown message kind {kind!r}")


def transcript_line(message) -> str:
    return json.dumps(message_to_dict(message), separators=(",", ":"))


def encode(message) -> bytes:
    payload = transcript_line(message).encode()
    return str(len(payload)).encode() + b":" + payload + b"\n"


def decode(data: bytes):
    """Parse one length-prefixed message; returns (message, remaining bytes)."""
    head, sep, rest = data.partition(b":")
    if not sep:
        raise ProtocolError("missing length prefix")
    try:
        n = int(head)
    except ValueError as exc:
        raise ProtocolError(f"bad length prefix {head!r}") from exc
    if len(rest) < n + 1:
        raise ProtocolError("truncated message")
    payload, tail = rest[:n], rest[n:]
    if not tail.startswith(b"\n"):
        raise ProtocolError("missing message terminator")
    return message_from_dict(json.loads(payload.decode())), tail[1:]


def write_transcript(messages, path: str) -> str:
    with open(path, "w") as fh:
        for msg in messages:
            fh.write(transcript_line(msg))
            fh.write("\n")
    return path
