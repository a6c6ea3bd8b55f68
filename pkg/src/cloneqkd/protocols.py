"""State alphabets and sifting semantics for BB84 and the trine protocol R04.

Both protocols use equatorial qubits (|0> + exp(i phi)|1>)/sqrt(2).  After
sifting, every conclusive round is described by a *context* (the basis
``y`` for BB84, the excluded Bob state ``n`` for R04) plus the bit values of
Alice (``k``) and Bob (``l``).  ``alice_index`` / ``bob_index`` translate a
(bit, context) pair back into the state index of each alphabet.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .qstate import equatorial_ket


class SiftOutcome(NamedTuple):
    conclusive: bool
    k: int | None
    l: int | None


@dataclass(frozen=True)
class ProtocolSpec:
    """Phase tables and index algebra of one protocol."""

    kind: str
    alice_phases: tuple
    bob_phases: tuple

    @property
    def n_alice(self):
        return len(self.alice_phases)

    @property
    def contexts(self):
        """Announcement values: bases for BB84, excluded indices for R04."""
        return tuple(range(2)) if self.kind == "bb84" else tuple(range(3))

    @property
    def n_contexts(self):
        return len(self.contexts)

    def alice_index(self, k, context):
        if self.kind == "bb84":
            return 2 * k + context
        return (context + 1 - k) % 3

    def bob_index(self, l, context):
        if self.kind == "bb84":
            return 2 * l + context
        return (context + 1 + l) % 3

    def alice_bit(self, index, context):
        """Alice's bit for state ``index`` under ``context``; None if inconclusive."""
        for k in (0, 1):
            if self.alice_index(k, context) == index:
                return k
        return None

    def bob_bit(self, index, context):
        for l in (0, 1):
            if self.bob_index(l, context) == index:
                return l
        return None

    @property
    def conclusive_rate(self):
        """Fraction of uniformly drawn (Alice state, context) pairs that sift."""
        hits = sum(
            self.alice_bit(j, c) is not None
            for j in range(self.n_alice)
            for c in self.contexts
        )
        return hits / (self.n_alice * self.n_contexts)


BB84 = ProtocolSpec(
    kind="bb84",
    alice_phases=tuple(n * np.pi / 2 for n in range(4)),
    bob_phases=tuple(n * np.pi / 2 for n in range(4)),
)

R04 = ProtocolSpec(
    kind="r04",
    alice_phases=tuple(2 * n * np.pi / 3 for n in range(3)),
    bob_phases=tuple(2 * n * np.pi / 3 + np.pi / 3 for n in range(3)),
)

PROTOCOLS = {"bb84": BB84, "r04": R04}


def get_protocol(protocol):
    """Look up a protocol by name ("bb84" | "r04"); specs pass through."""
    if isinstance(protocol, ProtocolSpec):
        return protocol
    try:
        return PROTOCOLS[str(protocol).lower()]
    except KeyError:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {sorted(PROTOCOLS)}") from None


def protocol_state(protocol, role, n):
    """Ket of Alice's or Bob's ``n``-th alphabet state."""
    spec = get_protocol(protocol)
    role = role.lower()
    if role not in ("alice", "bob"):
        raise ValueError(f"role must be 'alice' or 'bob', got {role!r}")
    phases = spec.alice_phases if role == "alice" else spec.bob_phases
    if not 0 <= n < len(phases):
        raise IndexError(f"{spec.kind} {role} index {n} out of range")
    return equatorial_ket(phases[n])


def alphabet(protocol, role):
    spec = get_protocol(protocol)
    n = spec.n_alice
    return np.array([protocol_state(spec, role, j) for j in range(n)])


_BASIS_NAMES = {"x": 0, "y": 1}


def _parse_announcement(spec, announcement):
    if spec.kind == "bb84" and isinstance(announcement, str):
        key = announcement.lower()
        if key not in _BASIS_NAMES:
            raise ValueError(f"BB84 basis must be X or Y, got {announcement!r}")
        return _BASIS_NAMES[key]
    if isinstance(announcement, str):
        match = re.fullmatch(r"!?b?_?(\d+)", announcement.strip().lower())
        if match is None:
            raise ValueError(f"malformed R04 announcement {announcement!r}")
        announcement = int(match.group(1))
    if isinstance(announcement, (bool, np.bool_)) or not isinstance(announcement, (int, np.integer)):
        raise ValueError(f"malformed announcement {announcement!r}")
    if announcement not in spec.contexts:
        raise ValueError(f"announcement {announcement} outside {spec.contexts}")
    return int(announcement)


def sift_rule(protocol, announcement):
    """Sifting table for one public announcement.

    Parameters
    ----------
    protocol : str or ProtocolSpec
    announcement : int or str
        BB84: Bob's basis (0/1 or "X"/"Y").  R04: index ``n`` of the state
        Bob reports he did *not* detect (``n`` or ``"!b_n"``).

    Returns
    -------
    dict
        Maps (Alice state index, Bob outcome index) to a SiftOutcome.  Bob
        outcomes are the states of his measurement compatible with the
        announcement.
    """
    spec = get_protocol(protocol)
    ctx = _parse_announcement(spec, announcement)
    bob_outcomes = [spec.bob_index(l, ctx) for l in (0, 1)]
    table = {}
    for j in range(spec.n_alice):
        k = spec.alice_bit(j, ctx)
        for b in bob_outcomes:
            if k is None:
                table[(j, b)] = SiftOutcome(False, None, None)
            else:
                table[(j, b)] = SiftOutcome(True, k, spec.bob_bit(b, ctx))
    return table
