"""Eve's post-sifting measurement and the three-party bit distribution.

For each probe polarization ``x`` and sifting context, Eve holds one of two
conditional (unnormalized) qubit states, one per value of the sifted bit.
She measures along the difference of their Bloch vectors, which is the
minimum-error (Helstrom) measurement for the pair.  Averaging the
normalized per-context tables gives p(k, l, m) over Alice's, Bob's and
Eve's bits.

Two routes compute the table:

* a batched pure-state route over arrays of (p, Lambda^2), used for grid
  scans and optimization;
* a density-matrix route taking one two-qubit state per (probe, Alice
  state), which also processes reconstructed tomography data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cloner import ClonerParams, branch_amplitudes
from .protocols import alphabet, get_protocol
from .qstate import PAULIS, bloch_angles, ket_from_angles, ket_to_dm

DEGENERACY_ATOL = 1e-12

_PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
_MINUS = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2)


class IndistinguishableStatesError(ValueError):
    """Eve's two conditional states have identical Bloch vectors."""


class PovmPair(NamedTuple):
    e0: np.ndarray
    e1: np.ndarray
    theta: tuple
    phi: tuple


def _bloch_of(state):
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        state = np.outer(state, state.conj())
    return np.array([np.trace(s @ state).real for s in PAULIS])


def povm_from_direction(direction):
    """Orthogonal projector pair along +direction (bit 0) and -direction."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    theta0, phi0 = bloch_angles(direction)
    theta1, phi1 = np.pi - theta0, phi0 + np.pi
    return PovmPair(
        ket_from_angles(theta0, phi0),
        ket_from_angles(theta1, phi1),
        (theta0, theta1),
        (phi0, phi1),
    )


def x_basis_povm():
    """Fallback measurement used when Eve's states cannot be told apart."""
    return PovmPair(_PLUS, _MINUS, (np.pi / 2, np.pi / 2), (0.0, np.pi))


def helstrom_povm(eps0, eps1):
    """Helstrom measurement for two unnormalized conditional states.

    Accepts kets or 2x2 operators.  Norms act as prior weights, so the
    Bloch vectors are taken without renormalization.
    """
    diff = _bloch_of(eps0) - _bloch_of(eps1)
    if np.linalg.norm(diff) < DEGENERACY_ATOL:
        raise IndistinguishableStatesError("indistinguishable states")
    return povm_from_direction(diff)


def _contract_bob(bob_ket, two_qubit):
    """<b|_Bob applied to a ket (4,) or a density matrix (4, 4)."""
    two_qubit = np.asarray(two_qubit, dtype=complex)
    if two_qubit.ndim == 1:
        return bob_ket.conj() @ two_qubit.reshape(2, 2)
    t = two_qubit.reshape(2, 2, 2, 2)
    return np.einsum("a,aebf,b->ef", bob_ket.conj(), t, bob_ket)


def _pure_states(protocol, params):
    spec = get_protocol(protocol)
    kets = alphabet(spec, "alice")
    return branch_amplitudes(kets, params.p, params.lambda2)[0].reshape(2, spec.n_alice, 4)


def eve_conditional_states(protocol, params, probe, context):
    """Eve's unnormalized qubits (eps_0, eps_1) for one probe and context."""
    spec = get_protocol(protocol)
    if probe not in (0, 1):
        raise ValueError(f"probe bit must be 0 or 1, got {probe!r}")
    if context not in spec.contexts:
        raise ValueError(f"context {context!r} outside {spec.contexts}")
    psi = _pure_states(spec, params)[probe]
    bobs = alphabet(spec, "bob")
    return tuple(
        _contract_bob(bobs[spec.bob_index(m, context)], psi[spec.alice_index(m, context)])
        for m in (0, 1)
    )


@dataclass(frozen=True)
class JointDistribution:
    """p(k, l, m) for Alice, Bob and Eve, with its per-context blocks.

    ``blocks[x, c]`` is the normalized table for probe ``x`` and sifting
    context ``c``; ``table`` is their average.
    """

    table: np.ndarray
    blocks: np.ndarray
    protocol: str
    params: ClonerParams | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def qber(self):
        return float(self.table[0, 1].sum() + self.table[1, 0].sum())

    def pair(self, parties):
        """2x2 marginal over two of "A", "B", "E"."""
        axes = {"A": 0, "B": 1, "E": 2}
        a, b = (axes[s.upper()] for s in parties)
        if a == b:
            raise ValueError("need two distinct parties")
        other = 3 - a - b
        m = self.table.sum(axis=other)
        return m if a < b else m.T


def _check_blocks(blocks):
    sums = blocks.sum(axis=(-3, -2, -1))
    if np.any(sums <= 0):
        raise ValueError("a sifting context has zero probability")
    return blocks / sums[..., None, None, None]


def joint_distribution(protocol, params=None, *, states=None, eve_measurement=None):
    """Three-party bit distribution under the cloning attack.

    Parameters
    ----------
    protocol : str or ProtocolSpec
    params : ClonerParams, optional
        Cloner settings; required unless ``states`` is given.
    states : array_like, shape (2, n_alice, 4, 4), optional
        Bob-Eve density matrices per (probe, Alice state), e.g. from
        tomography.  Replaces the internally generated pure states.
    eve_measurement : callable, optional
        ``f(eps0, eps1, probe, context) -> PovmPair`` overriding the
        Helstrom construction.

    Returns
    -------
    JointDistribution
    """
    spec = get_protocol(protocol)
    if states is None and eve_measurement is None:
        if params is None:
            raise ValueError("params or states must be given")
        blocks = joint_blocks(spec, [params.p], [params.lambda2])[0]
        return JointDistribution(blocks.mean(axis=(0, 1)), blocks, spec.kind, params)

    if states is None:
        psi = _pure_states(spec, params)
        states = np.einsum("xji,xjk->xjik", psi, psi.conj())
    states = np.asarray(states, dtype=complex)
    if states.shape != (2, spec.n_alice, 4, 4):
        raise ValueError(f"states must have shape (2, {spec.n_alice}, 4, 4), got {states.shape}")
    bobs = alphabet(spec, "bob")
    blocks = np.zeros((2, spec.n_contexts, 2, 2, 2))
    for x in (0, 1):
        for c in spec.contexts:
            eps = [
                _contract_bob(bobs[spec.bob_index(m, c)], states[x, spec.alice_index(m, c)])
                for m in (0, 1)
            ]
            if eve_measurement is not None:
                povm = eve_measurement(eps[0], eps[1], x, c)
            else:
                try:
                    povm = helstrom_povm(*eps)
                except IndistinguishableStatesError:
                    povm = x_basis_povm()
            for k in (0, 1):
                rho = states[x, spec.alice_index(k, c)]
                for l in (0, 1):
                    eve_op = _contract_bob(bobs[spec.bob_index(l, c)], rho)
                    for m, e in enumerate((povm.e0, povm.e1)):
                        blocks[x, c, k, l, m] = np.real(e.conj() @ eve_op @ e)
    blocks = _check_blocks(np.clip(blocks, 0.0, None))
    return JointDistribution(blocks.mean(axis=(0, 1)), blocks, spec.kind, params)


def _bloch_batch(v):
    """Bloch vectors of unnormalized kets, v shape (..., 2)."""
    a, b = v[..., 0], v[..., 1]
    ab = np.conj(a) * b
    return np.stack([2 * ab.real, 2 * ab.imag, np.abs(a) ** 2 - np.abs(b) ** 2], axis=-1)


def _povm_batch(eps0, eps1):
    d = _bloch_batch(eps0) - _bloch_batch(eps1)
    norm = np.linalg.norm(d, axis=-1)
    degenerate = norm < DEGENERACY_ATOL
    d = np.where(degenerate[..., None], [1.0, 0.0, 0.0], d / np.where(degenerate, 1.0, norm)[..., None])
    theta = np.arctan2(np.hypot(d[..., 0], d[..., 1]), d[..., 2])
    phi = np.arctan2(d[..., 1], d[..., 0])
    e0 = np.stack([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)
    e1 = np.stack([np.sin(theta / 2), -np.exp(1j * phi) * np.cos(theta / 2)], axis=-1)
    return e0, e1


def joint_blocks(protocol, p, lambda2):
    """Per-context normalized tables for a batch of parameters.

    Returns an array of shape (N, 2, n_contexts, 2, 2, 2).
    """
    spec = get_protocol(protocol)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    lambda2 = np.atleast_1d(np.asarray(lambda2, dtype=float))
    psi = branch_amplitudes(alphabet(spec, "alice"), p, lambda2)  # (N, 2, J, 2, 2)
    bobs_conj = alphabet(spec, "bob").conj()
    out = np.zeros((p.size, 2, spec.n_contexts, 2, 2, 2))
    for c in spec.contexts:
        a_idx = [spec.alice_index(k, c) for k in (0, 1)]
        b_idx = [spec.bob_index(l, c) for l in (0, 1)]
        # Eve's qubit after Bob projects: eve[n, x, k, l, :]
        eve = np.einsum("lb,nxkbe->nxkle", bobs_conj[b_idx], psi[:, :, a_idx])
        e0, e1 = _povm_batch(eve[:, :, 0, 0], eve[:, :, 1, 1])
        for m, e in enumerate((e0, e1)):
            amp = np.einsum("nxe,nxkle->nxkl", e.conj(), eve)
            out[:, :, c, :, :, m] = np.abs(amp) ** 2
    return _check_blocks(out)


def joint_tables(protocol, p, lambda2):
    """Averaged p(k, l, m) for a batch of parameters, shape (N, 2, 2, 2)."""
    return joint_blocks(protocol, p, lambda2).mean(axis=(1, 2))


def mixed_states(protocol, params, noise=0.0):
    """Per-(probe, Alice state) Bob-Eve density matrices with white noise.

    ``noise`` is the weight of the maximally mixed admixture.
    """
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise weight must lie in [0, 1]")
    psi = _pure_states(protocol, params)
    psi = psi / np.linalg.norm(psi, axis=-1, keepdims=True)
    rho = np.array([[ket_to_dm(v) for v in row] for row in psi])
    return (1 - noise) * rho + noise * np.eye(4) / 4
