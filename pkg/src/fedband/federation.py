"""Phase logic for the federated elimination protocol.

One phase, seen from a client: receive the union active set and budget f(p),
pull every union node ceil((1-alpha) f(p)) times and every own node another
ceil(M alpha f(p)) times, upload the per-node means, receive the server's
across-client averages, mix them with the local means, eliminate own nodes
that are confidently worse than the current favourite, and expand the
survivors' children for the next phase. The server only unions sets, computes
f(p), and averages uploaded estimates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .partition import NodeId, canonical_order, children
from .protocol import (
    ActiveSetUpload,
    EstimateUpload,
    GlobalEstimateBroadcast,
    PhaseBroadcast,
)

DEFAULT_CONF_C = math.sqrt(2.0)


class FederationError(ValueError):
    pass


class ClientMode(enum.Enum):
    GLOBAL_EXPLORE = "global_explore"
    LOCAL_EXPLORE = "local_explore"
    AWAIT_EXPLOIT = "await_exploit"
    ELIMINATE = "eliminate"
    TERMINAL = "terminal"


@dataclass
class ClientState:
    """Everything one client carries across a phase."""

    client: int
    phase: int = 1
    depth: int = 1
    own_set: tuple[NodeId, ...] = (NodeId(1, 1), NodeId(1, 2))
    union_set: tuple[NodeId, ...] = ()
    pending: dict = field(default_factory=dict)
    reward_sum: dict = field(default_factory=dict)
    pull_count: dict = field(default_factory=dict)
    local_mean: dict = field(default_factory=dict)
    global_mean: dict = field(default_factory=dict)
    mixed_mean: dict = field(default_factory=dict)
    exploit: Optional[NodeId] = None
    survivors: tuple[NodeId, ...] = ()
    mode: ClientMode = ClientMode.GLOBAL_EXPLORE


def make_client(m: int) -> ClientState:
    if m < 1:
        raise FederationError(f"client id {m} must be >= 1")
    return ClientState(client=m)


def phase_budget(T: int, M: int, nu1: float, rho: float, depth: int) -> float:
    """f(p) = 2 ln(T) / (M nu1^2 rho^(2h)) with h the phase depth."""
    if T < 2:
        raise FederationError(f"horizon {T} must be >= 2")
    return 2.0 * math.log(T) / (M * nu1**2 * rho ** (2 * depth))


def server_begin_phase(
    uploads: Sequence[ActiveSetUpload], T: int, M: int, nu1: float, rho: float
) -> PhaseBroadcast:
    """Union the clients' active sets and attach the per-node budget."""
    if len(uploads) != M:
        raise FederationError(f"expected {M} active-set uploads, got {len(uploads)}")
    seen = sorted(u.client for u in uploads)
    if seen != list(range(1, M + 1)):
        missing = sorted(set(range(1, M + 1)) - set(seen))
        raise FederationError(f"missing or duplicate client uploads (missing: {missing})")
    phases = {u.phase for u in uploads}
    if len(phases) != 1:
        raise FederationError(f"uploads span phases {sorted(phases)}")
    depths = {n.depth for u in uploads for n in u.nodes}
    if len(depths) != 1:
        raise FederationError(f"active sets mix depths {sorted(depths)}")
    depth = depths.pop()
    union = canonical_order({n for u in uploads for n in u.nodes})
    return PhaseBroadcast(phase=phases.pop(), nodes=union, budget=phase_budget(T, M, nu1, rho, depth))


def pull_counts(budget: float, alpha: float, M: int) -> tuple[int, int]:
    """(per union node, per own node extra): ceil((1-a) f), ceil(M a f)."""
    return math.ceil((1.0 - alpha) * budget), math.ceil(M * alpha * budget)


@dataclass(frozen=True)
class PullBlock:
    """A run of consecutive pulls of one node."""

    node: NodeId
    count: int


def plan_schedule(
    client: ClientState, broadcast: PhaseBroadcast, alpha: float, M: int
) -> tuple[PullBlock, ...]:
    """The client's pull order for one phase, in canonical (depth, index) order.

    Also primes the client's pending counters; record_pull draws them down.
    """
    if broadcast.phase != client.phase:
        raise FederationError(
            f"broadcast phase {broadcast.phase} != client phase {client.phase}"
        )
    if not set(client.own_set) <= set(broadcast.nodes):
        raise FederationError("client active set not contained in union broadcast")
    g, l = pull_counts(broadcast.budget, alpha, M)
    blocks = []
    for node in canonical_order(broadcast.nodes):
        if g > 0:
            blocks.append(PullBlock(node=node, count=g))
    for node in canonical_order(client.own_set):
        if l > 0:
            blocks.append(PullBlock(node=node, count=l))

    client.union_set = canonical_order(broadcast.nodes)
    client.pending = {}
    for b in blocks:
        client.pending[b.node] = client.pending.get(b.node, 0) + b.count
    client.reward_sum = {n: 0.0 for n in client.union_set}
    client.pull_count = {n: 0 for n in client.union_set}
    client.local_mean = {}
    client.global_mean = {}
    client.mixed_mean = {}
    client.exploit = None
    client.mode = ClientMode.GLOBAL_EXPLORE if g > 0 else ClientMode.LOCAL_EXPLORE
    return tuple(blocks)


def record_pull(client: ClientState, node, reward: float) -> ClientState:
    """Fold one exploration reward into the node's running sum."""
    node = NodeId(*node)
    left = client.pending.get(node, 0)
    if left <= 0:
        raise FederationError(f"pull outside schedule at node {tuple(node)}")
    client.pending[node] = left - 1
    client.reward_sum[node] += reward
    client.pull_count[node] += 1
    return client


def record_pull_block(client: ClientState, node, reward_total: float, count: int) -> ClientState:
    """Batch form of record_pull: count pulls whose rewards sum to reward_total."""
    node = NodeId(*node)
    left = client.pending.get(node, 0)
    if count < 0 or left < count:
        raise FederationError(
            f"pull outside schedule at node {tuple(node)} ({count} requested, {left} scheduled)"
        )
    client.pending[node] = left - count
    client.reward_sum[node] += reward_total
    client.pull_count[node] += count
    return client


def local_estimates(client: ClientState) -> dict:
    """Per-node means s / T over the finished schedule.

    Union nodes this client never pulled (possible only at alpha = 1) are
    absent from the result: there is no data to report.
    """
    unfinished = sum(v for v in client.pending.values())
    if unfinished:
        raise FederationError(f"schedule not complete: {unfinished} pulls outstanding")
    est = {}
    for node in client.union_set:
        n = client.pull_count.get(node, 0)
        if n > 0:
            est[node] = client.reward_sum[node] / n
    client.local_mean = est
    client.mode = ClientMode.AWAIT_EXPLOIT
    return est


def build_estimate_upload(client: ClientState) -> EstimateUpload:
    entries = [
        (node, mean, client.pull_count[node])
        for node, mean in sorted(client.local_mean.items())
    ]
    return EstimateUpload(phase=client.phase, client=client.client, entries=tuple(entries))


def server_aggregate(uploads: Sequence[EstimateUpload]) -> GlobalEstimateBroadcast:
    """Average uploaded means per node over the clients that have data."""
    if not uploads:
        raise FederationError("no estimate uploads")
    phases = {u.phase for u in uploads}
    if len(phases) != 1:
        raise FederationError(f"uploads span phases {sorted(phases)}")
    sums: dict[NodeId, float] = {}
    counts: dict[NodeId, int] = {}
    for u in uploads:
        for node, mean, _ in u.entries:
            sums[node] = sums.get(node, 0.0) + mean
            counts[node] = counts.get(node, 0) + 1
    if not sums:
        raise FederationError("node missing from all uploads")
    entries = tuple((node, sums[node] / counts[node]) for node in sorted(sums))
    return GlobalEstimateBroadcast(phase=phases.pop(), entries=entries)


def apply_global(client: ClientState, broadcast: GlobalEstimateBroadcast) -> ClientState:
    if broadcast.phase != client.phase:
        raise FederationError(
            f"global broadcast phase {broadcast.phase} != client phase {client.phase}"
        )
    client.global_mean = broadcast.as_dict()
    return client


def exploit_node(client: ClientState) -> NodeId:
    """Favourite node while waiting: argmax of LOCAL means over the own set.

    Ties break to the smallest (depth, index).
    """
    if not client.local_mean:
        raise FederationError("local estimates not computed")
    own = [n for n in canonical_order(client.own_set) if n in client.local_mean]
    if not own:
        raise FederationError("no own-node estimates available")
    best_val = max(client.local_mean[n] for n in own)
    best = min(n for n in own if client.local_mean[n] == best_val)
    client.exploit = best
    return best


def mix_estimates(client: ClientState, alpha: float) -> dict:
    """Blend local and server means per own node: a*local + (1-a)*global."""
    mixed = {}
    for node in client.own_set:
        if node not in client.local_mean:
            raise FederationError(f"missing local estimate for own node {tuple(node)}")
        if alpha < 1.0 and node not in client.global_mean:
            raise FederationError(f"missing global estimate for own node {tuple(node)}")
        g = client.global_mean.get(node, 0.0)
        mixed[node] = alpha * client.local_mean[node] + (1.0 - alpha) * g
    client.mixed_mean = mixed
    return mixed


def confidence_radius(T: int, M: int, budget: float, c: float = DEFAULT_CONF_C) -> float:
    """B_p = c sqrt(ln T / (M f(p)))."""
    if budget <= 0:
        raise FederationError(f"budget {budget} must be positive")
    return c * math.sqrt(math.log(T) / (M * budget))


@dataclass(frozen=True)
class EliminationDecision:
    phase: int
    client: int
    eliminated: tuple[NodeId, ...]
    survivors: tuple[NodeId, ...]
    next_active: tuple[NodeId, ...]
    radius: float


def eliminate(
    client: ClientState, alpha: float, nu1: float, rho: float, radius: float
) -> EliminationDecision:
    """Drop own nodes whose upper value cannot reach the favourite's lower value.

    A node goes when mixed + nu1*rho^h <= mixed(favourite) - 2*radius, with
    exact <= and no slack. The favourite can never satisfy this against
    itself, so it always survives.
    """
    if not client.mixed_mean:
        raise FederationError("mixed estimates not computed")
    if client.exploit is None:
        raise FederationError("exploit node not chosen")
    client.mode = ClientMode.ELIMINATE
    threshold = nu1 * rho**client.depth
    benchmark = client.mixed_mean[client.exploit] - 2.0 * radius
    eliminated = tuple(
        n for n in canonical_order(client.own_set)
        if client.mixed_mean[n] + threshold <= benchmark
    )
    if client.exploit in eliminated:
        raise FederationError("favourite node eliminated; radii must be non-positive")
    survivors = tuple(n for n in canonical_order(client.own_set) if n not in eliminated)
    next_active = canonical_order(
        c for n in survivors for c in children(n)
    )
    return EliminationDecision(
        phase=client.phase,
        client=client.client,
        eliminated=eliminated,
        survivors=survivors,
        next_active=next_active,
        radius=radius,
    )


def advance(client: ClientState, decision: EliminationDecision) -> ClientState:
    """Step into the next phase with the survivors' children."""
    if decision.phase != client.phase or decision.client != client.client:
        raise FederationError("decision does not match client state")
    client.survivors = decision.survivors
    client.own_set = decision.next_active
    client.phase += 1
    client.depth += 1
    client.pending = {}
    client.mode = ClientMode.GLOBAL_EXPLORE
    return client


def terminal_action(client: ClientState) -> NodeId:
    """Node played for the remaining rounds: best mixed estimate among the
    final survivors, ties to the smallest (depth, index)."""
    if not client.survivors:
        raise FederationError("no survivor set recorded")
    missing = [n for n in client.survivors if n not in client.mixed_mean]
    if missing:
        raise FederationError(f"no mixed estimate for survivor {tuple(missing[0])}")
    best_val = max(client.mixed_mean[n] for n in client.survivors)
    best = min(n for n in client.survivors if client.mixed_mean[n] == best_val)
    client.mode = ClientMode.TERMINAL
    return best


def stopping_depth(T: int, rho: float, d_prime: float = 0.0) -> int:
    """Deepest phase: H = ceil(ln T / ((d' + 3) ln(1/rho)))."""
    if T < 2:
        raise FederationError(f"horizon {T} must be >= 2")
    if not 0.0 < rho < 1.0:
        raise FederationError(f"rho {rho} must lie in (0, 1)")
    if d_prime < 0:
        raise FederationError(f"d' {d_prime} must be >= 0")
    return math.ceil(math.log(T) / ((d_prime + 3.0) * math.log(1.0 / rho)))


def sample_count_bound(budget: float, alpha: float, M: int) -> tuple[int, float]:
    """Effective samples behind a mixed own-node estimate and their floor M*f(p)."""
    g, l = pull_counts(budget, alpha, M)
    return l + M * g, M * budget
