import math

import pytest

from fedband.federation import (
    DEFAULT_CONF_C,
    ClientMode,
    FederationError,
    advance,
    build_estimate_upload,
    confidence_radius,
    eliminate,
    exploit_node,
    local_estimates,
    make_client,
    mix_estimates,
    phase_budget,
    plan_schedule,
    pull_counts,
    record_pull,
    record_pull_block,
    sample_count_bound,
    server_aggregate,
    server_begin_phase,
    stopping_depth,
    terminal_action,
)
from fedband.partition import NodeId
from fedband.protocol import ActiveSetUpload, EstimateUpload, GlobalEstimateBroadcast

T_PAPER = 2_000_000


def begin_phase(M=10, T=T_PAPER, sets=None, phase=1):
    if sets is None:
        sets = [(NodeId(1, 1), NodeId(1, 2))] * M
    uploads = [
        ActiveSetUpload(phase=phase, client=m, nodes=sets[m - 1]) for m in range(1, M + 1)
    ]
    return server_begin_phase(uploads, T, M, 1.0, 0.5)


def test_phase_budget_paper_value():
    f = phase_budget(T_PAPER, 10, 1.0, 0.5, 1)
    assert f == pytest.approx(2 * math.log(T_PAPER) / (10 * 0.25), abs=1e-12)
    assert f == pytest.approx(11.6069, abs=5e-5)


def test_server_begin_phase_unions_without_duplicates():
    bc = begin_phase(M=2)
    assert bc.nodes == (NodeId(1, 1), NodeId(1, 2))


def test_server_begin_phase_disjoint_union():
    sets = [
        (NodeId(3, 1), NodeId(3, 2)),
        (NodeId(3, 3), NodeId(3, 4), NodeId(3, 5), NodeId(3, 6)),
    ]
    # disjoint sets of sizes 2 and 4 union to 6 nodes
    bc = begin_phase(M=2, sets=sets, phase=3)
    assert len(bc.nodes) == 6


def test_server_begin_phase_requires_all_clients():
    uploads = [ActiveSetUpload(phase=1, client=1, nodes=(NodeId(1, 1), NodeId(1, 2)))]
    with pytest.raises(FederationError):
        server_begin_phase(uploads, T_PAPER, 2, 1.0, 0.5)


def test_server_begin_phase_rejects_depth_mismatch():
    uploads = [
        ActiveSetUpload(phase=1, client=1, nodes=(NodeId(1, 1), NodeId(1, 2))),
        ActiveSetUpload(phase=1, client=2, nodes=(NodeId(2, 1), NodeId(2, 2))),
    ]
    with pytest.raises(FederationError):
        server_begin_phase(uploads, T_PAPER, 2, 1.0, 0.5)


def test_pull_counts_alpha_endpoints():
    f = 11.6069
    assert pull_counts(f, 1.0, 10) == (0, math.ceil(10 * f))
    assert pull_counts(f, 0.0, 10) == (math.ceil(f), 0)


def test_pull_counts_paper_example():
    f = phase_budget(T_PAPER, 10, 1.0, 0.5, 1)
    g, l = pull_counts(f, 0.5, 10)
    assert (g, l) == (6, 59)


def test_plan_schedule_orders_and_counts():
    bc = begin_phase(M=10)
    client = make_client(1)
    blocks = plan_schedule(client, bc, 0.5, 10)
    # union blocks first in (depth, index) order, then own blocks
    assert [b.node for b in blocks] == [NodeId(1, 1), NodeId(1, 2), NodeId(1, 1), NodeId(1, 2)]
    assert [b.count for b in blocks] == [6, 6, 59, 59]
    assert client.mode is ClientMode.GLOBAL_EXPLORE


def test_plan_schedule_alpha_one_skips_union_blocks():
    bc = begin_phase(M=10)
    client = make_client(1)
    blocks = plan_schedule(client, bc, 1.0, 10)
    assert all(b.node in client.own_set for b in blocks)
    assert client.mode is ClientMode.LOCAL_EXPLORE


def test_record_pull_first_update():
    bc = begin_phase(M=10)
    client = make_client(1)
    plan_schedule(client, bc, 0.5, 10)
    record_pull(client, NodeId(1, 1), 0.7)
    assert client.reward_sum[NodeId(1, 1)] == 0.7
    assert client.pull_count[NodeId(1, 1)] == 1


def test_record_pull_running_mean():
    bc = begin_phase(M=10)
    client = make_client(1)
    plan_schedule(client, bc, 0.5, 10)
    record_pull(client, NodeId(1, 2), 0.4)
    record_pull(client, NodeId(1, 2), 0.6)
    assert client.reward_sum[NodeId(1, 2)] / client.pull_count[NodeId(1, 2)] == pytest.approx(0.5)


def test_record_pull_outside_schedule_rejected():
    bc = begin_phase(M=10)
    client = make_client(1)
    plan_schedule(client, bc, 0.5, 10)
    for _ in range(65):
        record_pull(client, NodeId(1, 1), 0.5)
    # schedule for that node is exhausted; further pulls may not update stats
    with pytest.raises(FederationError):
        record_pull(client, NodeId(1, 1), 0.5)


def test_record_pull_block_matches_singles():
    bc = begin_phase(M=10)
    a, b = make_client(1), make_client(2)
    plan_schedule(a, bc, 0.5, 10)
    plan_schedule(b, bc, 0.5, 10)
    for _ in range(10):
        record_pull(a, NodeId(1, 1), 0.3)
    record_pull_block(b, NodeId(1, 1), 3.0, 10)
    assert a.reward_sum[NodeId(1, 1)] == pytest.approx(b.reward_sum[NodeId(1, 1)])
    assert a.pull_count[NodeId(1, 1)] == b.pull_count[NodeId(1, 1)]


def finish_schedule(client, bc, alpha, M, value=0.5, values=None):
    blocks = plan_schedule(client, bc, alpha, M)
    for blk in blocks:
        v = value if values is None else values[blk.node]
        record_pull_block(client, blk.node, v * blk.count, blk.count)
    return local_estimates(client)


def test_local_estimates_simple_division():
    bc = begin_phase(M=10)
    client = make_client(1)
    plan_schedule(client, bc, 0.5, 10)
    # drain the schedule with reward sum 3.0 over first 6 pulls of (1,1)
    record_pull_block(client, NodeId(1, 1), 3.0, 6)
    record_pull_block(client, NodeId(1, 1), 29.5, 59)
    record_pull_block(client, NodeId(1, 2), 32.5, 65)
    est = local_estimates(client)
    assert est[NodeId(1, 1)] == pytest.approx(32.5 / 65)
    assert est[NodeId(1, 2)] == pytest.approx(0.5)


def test_local_estimates_own_node_pull_total():
    # own-node sample count at alpha=0.5, f=11.6069, M=10 is 6 + 59 = 65
    bc = begin_phase(M=10)
    client = make_client(1)
    finish_schedule(client, bc, 0.5, 10)
    assert client.pull_count[NodeId(1, 1)] == 65
    assert client.pull_count[NodeId(1, 2)] == 65


def test_local_estimates_requires_completed_schedule():
    bc = begin_phase(M=10)
    client = make_client(1)
    plan_schedule(client, bc, 0.5, 10)
    with pytest.raises(FederationError):
        local_estimates(client)


def test_alpha_one_foreign_nodes_have_no_data():
    sets = [[(NodeId(1, 1), NodeId(1, 2))], [(NodeId(1, 1), NodeId(1, 2))]]
    bc = begin_phase(M=2, T=100_000)
    client = make_client(1)
    est = finish_schedule(client, bc, 1.0, 2)
    assert set(est) == set(client.own_set)


def test_server_aggregate_mean_of_two():
    ups = [
        EstimateUpload(phase=1, client=1, entries=((NodeId(1, 1), 0.4, 6),)),
        EstimateUpload(phase=1, client=2, entries=((NodeId(1, 1), 0.6, 6),)),
    ]
    gb = server_aggregate(ups)
    assert gb.as_dict()[NodeId(1, 1)] == pytest.approx(0.5)


def test_server_aggregate_identical_uploads():
    entries = ((NodeId(1, 1), 0.37, 6), (NodeId(1, 2), 0.73, 6))
    ups = [EstimateUpload(phase=1, client=m, entries=entries) for m in (1, 2, 3)]
    gb = server_aggregate(ups)
    assert gb.as_dict() == {NodeId(1, 1): pytest.approx(0.37), NodeId(1, 2): pytest.approx(0.73)}


def test_server_aggregate_nine_and_one():
    ups = [
        EstimateUpload(phase=1, client=m, entries=((NodeId(1, 1), 0.5, 6),))
        for m in range(1, 10)
    ]
    ups.append(EstimateUpload(phase=1, client=10, entries=((NodeId(1, 1), 0.6, 6),)))
    gb = server_aggregate(ups)
    assert gb.as_dict()[NodeId(1, 1)] == pytest.approx(0.51)


def test_exploit_node_argmax_and_ties():
    bc = begin_phase(M=10)
    client = make_client(1)
    finish_schedule(client, bc, 0.5, 10, values={NodeId(1, 1): 0.3, NodeId(1, 2): 0.7})
    assert exploit_node(client) == NodeId(1, 2)

    tie = make_client(2)
    finish_schedule(tie, begin_phase(M=10), 0.5, 10, value=0.5)
    assert exploit_node(tie) == NodeId(1, 1)  # tie goes to the smaller index


def test_mix_estimates_arithmetic():
    bc = begin_phase(M=10)
    client = make_client(1)
    finish_schedule(client, bc, 0.5, 10, values={NodeId(1, 1): 0.6, NodeId(1, 2): 0.6})
    gb = GlobalEstimateBroadcast(phase=1, entries=((NodeId(1, 1), 0.4), (NodeId(1, 2), 0.4)))
    client.global_mean = gb.as_dict()
    mixed = mix_estimates(client, 0.5)
    assert mixed[NodeId(1, 1)] == pytest.approx(0.5)


def test_mix_estimates_alpha_endpoints():
    bc = begin_phase(M=10)
    client = make_client(1)
    finish_schedule(client, bc, 0.5, 10, value=0.6)
    client.global_mean = {NodeId(1, 1): 0.1, NodeId(1, 2): 0.1}
    assert mix_estimates(client, 1.0)[NodeId(1, 1)] == pytest.approx(0.6)
    assert mix_estimates(client, 0.0)[NodeId(1, 1)] == pytest.approx(0.1)


def test_mix_estimates_missing_global_for_own_node():
    bc = begin_phase(M=10)
    client = make_client(1)
    finish_schedule(client, bc, 0.5, 10, value=0.6)
    client.global_mean = {NodeId(1, 1): 0.1}  # (1,2) missing
    with pytest.raises(FederationError):
        mix_estimates(client, 0.5)


def test_confidence_radius_equals_diameter_bound():
    # with f(p) from the budget formula, B_p collapses to nu1 * rho^h
    for T in (100_000, T_PAPER):
        for M in (1, 5, 10):
            for h in range(1, 10):
                f = phase_budget(T, M, 1.0, 0.5, h)
                B = confidence_radius(T, M, f, DEFAULT_CONF_C)
                assert abs(B - 0.5**h) <= 1e-12


def test_confidence_radius_at_depth_three():
    f = phase_budget(T_PAPER, 10, 1.0, 0.5, 3)
    assert confidence_radius(T_PAPER, 10, f) == pytest.approx(0.125, abs=1e-12)


def test_confidence_radius_scales_inverse_sqrt():
    B1 = confidence_radius(T_PAPER, 10, 20.0)
    B2 = confidence_radius(T_PAPER, 10, 40.0)
    assert B1 / B2 == pytest.approx(math.sqrt(2.0))


def make_decided_client(depth, mixed, exploit):
    client = make_client(1)
    client.phase = depth
    client.depth = depth
    client.own_set = tuple(sorted(mixed))
    client.mixed_mean = dict(mixed)
    client.local_mean = dict(mixed)
    client.exploit = exploit
    return client


def test_eliminate_wide_radius_keeps_everything():
    # at depth 1 the margin nu1*rho + 2*B = 1.5 exceeds any value gap in [0,1]
    client = make_decided_client(1, {NodeId(1, 1): 0.9, NodeId(1, 2): 0.2}, NodeId(1, 1))
    decision = eliminate(client, 0.5, 1.0, 0.5, radius=0.5)
    assert decision.eliminated == ()
    assert decision.survivors == (NodeId(1, 1), NodeId(1, 2))


def test_eliminate_at_depth_three():
    # 0.05 + 0.125 <= 0.9 - 0.25 holds, so the weak node goes
    client = make_decided_client(3, {NodeId(3, 1): 0.9, NodeId(3, 2): 0.05}, NodeId(3, 1))
    decision = eliminate(client, 0.5, 1.0, 0.5, radius=0.125)
    assert decision.eliminated == (NodeId(3, 2),)
    assert decision.survivors == (NodeId(3, 1),)
    assert decision.next_active == (NodeId(4, 1), NodeId(4, 2))


def test_eliminate_boundary_is_inclusive():
    # equality satisfies the rule: 0.525 + 0.125 == 0.9 - 0.25
    client = make_decided_client(3, {NodeId(3, 1): 0.9, NodeId(3, 2): 0.275}, NodeId(3, 1))
    decision = eliminate(client, 0.5, 1.0, 0.5, radius=0.125)
    assert decision.eliminated == (NodeId(3, 2),)


def test_eliminate_never_drops_exploit_node():
    client = make_decided_client(3, {NodeId(3, 1): 0.9, NodeId(3, 2): 0.9}, NodeId(3, 1))
    decision = eliminate(client, 0.5, 1.0, 0.5, radius=0.125)
    assert NodeId(3, 1) in decision.survivors


def test_advance_moves_to_children_depth():
    client = make_decided_client(3, {NodeId(3, 1): 0.9, NodeId(3, 2): 0.05}, NodeId(3, 1))
    decision = eliminate(client, 0.5, 1.0, 0.5, radius=0.125)
    advance(client, decision)
    assert client.phase == 4 and client.depth == 4
    assert client.own_set == (NodeId(4, 1), NodeId(4, 2))
    assert client.survivors == (NodeId(3, 1),)


def test_terminal_action_single_survivor():
    client = make_decided_client(3, {NodeId(3, 5): 0.8, NodeId(3, 6): 0.1}, NodeId(3, 5))
    client.survivors = (NodeId(3, 5),)
    assert terminal_action(client) == NodeId(3, 5)


def test_terminal_action_argmax_of_mixed():
    client = make_decided_client(3, {NodeId(3, 5): 0.81, NodeId(3, 6): 0.79}, NodeId(3, 5))
    client.survivors = (NodeId(3, 5), NodeId(3, 6))
    assert terminal_action(client) == NodeId(3, 5)


def test_terminal_action_requires_survivors():
    client = make_client(1)
    with pytest.raises(FederationError):
        terminal_action(client)


def test_stopping_depth_values():
    assert stopping_depth(T_PAPER, 0.5, 0.0) == 7
    assert stopping_depth(T_PAPER, 0.5, 1.0) == 6
    assert stopping_depth(100_000, 0.5, 0.0) == 6


def test_stopping_depth_monotone_in_rho():
    assert stopping_depth(T_PAPER, 0.25, 0.0) < stopping_depth(T_PAPER, 0.5, 0.0)


def test_sample_count_bound_holds():
    for T in (100_000, T_PAPER):
        for M in (1, 5, 10):
            for alpha in (0.0, 0.3, 0.5, 0.9, 1.0):
                for h in (1, 3, 5):
                    f = phase_budget(T, M, 1.0, 0.5, h)
                    effective, floor = sample_count_bound(f, alpha, M)
                    assert effective >= floor - 1e-9


def test_build_estimate_upload_counts():
    bc = begin_phase(M=10)
    client = make_client(3)
    finish_schedule(client, bc, 0.5, 10)
    up = build_estimate_upload(client)
    assert up.client == 3
    assert {e[2] for e in up.entries} == {65}
