"""Exhaustive search over joint action sequences for tiny instances.

Depth-first over slots; no pruning beyond stopping early once every packet
is delivered. Action tuples that all mean "stay silent" (no packet, zero
coverage, or silence power) collapse to one canonical no-transmission entry
before enumeration, and slot rates are memoized per (slot, effective joint
action), so the search spends its time on distinct radio configurations only.
Used as an upper bound that every policy must respect, and as an independent
replay path to cross-check the environment's bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from . import phy
from .channel import ChannelConfig, ChannelState, noise_lin_mw
from .scenario import Scenario


class SearchSpaceTooLarge(ValueError):
    """The requested enumeration exceeds the configured budget."""


NO_TX = phy.SlotAction(phy.PKT_NONE, 0.0, 0, phy.SILENCE_POWER_DBM)


@dataclass(frozen=True)
class OracleResult:
    best_delivered: int
    best_actions: tuple[tuple[phy.SlotAction, ...], ...]  # per slot, per source


def replay_actions(
    scenario: Scenario,
    chan: ChannelState,
    channel_cfg: ChannelConfig,
    slot_duration_s: float,
    actions_per_slot,
) -> phy.DeliveryLedger:
    """Replay a full joint action sequence with the shared masking rules."""
    noise = noise_lin_mw(channel_cfg)
    ledger = phy.DeliveryLedger(scenario.packets)
    for t, slot_actions in enumerate(actions_per_slot):
        masked = []
        for s, act in enumerate(slot_actions):
            pkt = phy.mask_packet_choice(ledger, s, act.packet_id, t)
            masked.append(
                act if pkt == act.packet_id else phy.SlotAction(pkt, act.coverage_m, act.freq, act.power_dbm)
            )
        phy.apply_slot(
            ledger,
            masked,
            chan.gain_lin[:, :, :, t],
            chan.dist_m,
            noise,
            channel_cfg.rb_bandwidth_hz,
            t,
            slot_duration_s,
        )
    return ledger


def dedupe_actions(
    coverage_options_m: tuple[float, ...],
    power_options_dbm: tuple[float, ...],
    packet_options: tuple[int, ...],
    F: int,
) -> list[phy.SlotAction]:
    """Per-source action list with every silent variant collapsed to NO_TX."""
    out = [NO_TX]
    for cov in coverage_options_m:
        for pkt in packet_options:
            for f in range(F):
                for pw in power_options_dbm:
                    if pkt == phy.PKT_NONE or cov <= 0 or pw <= phy.SILENCE_POWER_DBM:
                        continue
                    out.append(phy.SlotAction(pkt, cov, f, pw))
    return out


def brute_force_optimal(
    scenario: Scenario,
    chan: ChannelState,
    channel_cfg: ChannelConfig,
    slot_duration_s: float,
    coverage_options_m: tuple[float, ...],
    power_options_dbm: tuple[float, ...],
    packet_options: tuple[int, ...] = (phy.PKT_NONE, phy.PKT_SLICE1, phy.PKT_SLICE2),
    max_sequences: float = 1e7,
) -> OracleResult:
    """Maximum delivered-packet count over every joint action sequence."""
    m, _, F, T = chan.gain_lin.shape
    per_source = dedupe_actions(coverage_options_m, power_options_dbm, packet_options, F)
    joint = len(per_source) ** m
    sequences = float(joint) ** T
    if sequences > max_sequences:
        raise SearchSpaceTooLarge(
            f"{len(per_source)} distinct actions/source, {joint} joint actions, "
            f"{sequences:.3g} sequences exceeds budget {max_sequences:.3g}"
        )
    joint_actions = list(product(per_source, repeat=m))
    noise = noise_lin_mw(channel_cfg)
    bw = channel_cfg.rb_bandwidth_hz
    total_packets = len(scenario.packets)

    # static per-episode facts
    groups = {
        (s, act.coverage_m): phy.coverage_group(chan.dist_m[s], act.coverage_m)
        for s in range(m)
        for act in per_source
    }
    windows = [(p.arrival_slot, p.deadline_slot) for p in scenario.packets]
    sizes = [p.size_bits for p in scenario.packets]
    rate_memo: dict = {}

    best_count = -1
    best_seq: list[tuple[phy.SlotAction, ...]] = []
    seq: list[tuple[phy.SlotAction, ...]] = []

    def descend(t: int, leftover: tuple[float, ...], delivered: tuple[bool, ...]) -> None:
        nonlocal best_count, best_seq
        count = sum(delivered)
        if count > best_count and (count == total_packets or t == T):
            best_count = count
            best_seq = list(seq)
        if t == T or best_count == total_packets:
            return
        for slot_actions in joint_actions:
            effective = []
            for s, act in enumerate(slot_actions):
                pkt = act.packet_id
                if pkt != phy.PKT_NONE:
                    k = 2 * s + (pkt - 1)
                    lo, hi = windows[k]
                    if delivered[k] or not (lo <= t <= hi):
                        pkt = phy.PKT_NONE
                if pkt == phy.PKT_NONE:
                    effective.append((phy.PKT_NONE, (), 0, 0.0))
                else:
                    effective.append(
                        (pkt, groups[s, act.coverage_m], act.freq, phy.power_lin_mw(act.power_dbm))
                    )
            key = (t, tuple(effective))
            rates = rate_memo.get(key)
            if rates is None:
                rates = phy.slot_rates(effective, chan.gain_lin[:, :, :, t], noise, bw)
                rate_memo[key] = rates
            new_leftover = list(leftover)
            new_delivered = list(delivered)
            for s in range(m):
                pkt = effective[s][0]
                if pkt == phy.PKT_NONE or rates[s] <= 0.0:
                    continue
                k = 2 * s + (pkt - 1)
                sent = min(new_leftover[k], rates[s] * slot_duration_s)
                new_leftover[k] -= sent
                if new_leftover[k] <= 0.0:
                    new_leftover[k] = 0.0
                    new_delivered[k] = True
            seq.append(slot_actions)
            descend(t + 1, tuple(new_leftover), tuple(new_delivered))
            seq.pop()
            if best_count == total_packets:
                return

    descend(0, tuple(float(s) for s in sizes), tuple(False for _ in sizes))
    return OracleResult(best_delivered=best_count, best_actions=tuple(best_seq))
