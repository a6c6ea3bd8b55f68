"""Asymmetric phase-covariant optimal quantum cloner.

The cloner maps Alice's qubit onto two clones (Bob, Eve) plus an ancilla:

    |0> -> L|000> + Lb (sqrt(p)|01> + sqrt(q)|10>)|1>
    |1> -> L|111> + Lb (sqrt(p)|10> + sqrt(q)|01>)|0>

with ``L = Lambda``, ``Lb = sqrt(1 - Lambda**2)`` and ``q = 1 - p``.  In the
optical implementation the ancilla value is the polarization of Eve's probe
photon (0 = H, 1 = V), so projecting the ancilla gives the two
probe-conditioned two-photon maps used below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .qstate import check_ket, ket_to_dm, partial_trace
from .protocols import alphabet


@dataclass(frozen=True)
class ClonerParams:
    """Cloner settings: asymmetry ``p`` and strength ``lam`` (Lambda)."""

    p: float
    lam: float

    def __post_init__(self):
        for name in ("p", "lam"):
            value = float(getattr(self, name))
            if not 0.0 <= value <= 1.0 or math.isnan(value):
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_lambda2(cls, p, lambda2):
        if not 0.0 <= lambda2 <= 1.0:
            raise ValueError(f"lambda2 must lie in [0, 1], got {lambda2}")
        return cls(p, math.sqrt(lambda2))

    @property
    def q(self):
        return 1.0 - self.p

    @property
    def lam_bar(self):
        return math.sqrt(max(0.0, 1.0 - self.lam**2))

    @property
    def lambda2(self):
        return self.lam**2

    def swapped(self):
        """Parameters with the roles of Bob and Eve exchanged (p <-> q)."""
        return ClonerParams(self.q, self.lam)


class ShrinkingFactors(NamedTuple):
    eta: float
    eta_perp: float


def shrinking_factors(params, party="bob"):
    """Bloch-sphere contraction (equatorial, polar) of one clone."""
    party = party.lower()
    if party not in ("bob", "eve"):
        raise ValueError(f"party must be 'bob' or 'eve', got {party!r}")
    p = params.p if party == "bob" else params.q
    lam, lam_bar = params.lam, params.lam_bar
    eta = 2 * math.sqrt(p) * lam * lam_bar
    eta_perp = lam**2 + lam_bar**2 * (2 * p - 1)
    return ShrinkingFactors(eta, eta_perp)


def clone_fidelities(params):
    """Equatorial clone fidelities (F_B, F_E)."""
    f_b = (1 + shrinking_factors(params, "bob").eta) / 2
    f_e = (1 + shrinking_factors(params, "eve").eta) / 2
    return f_b, f_e


def branch_amplitudes(kets, p, lambda2):
    """Probe-conditioned two-qubit outputs for a batch of parameters.

    Parameters
    ----------
    kets : array_like, shape (J, 2)
        Input qubits.
    p, lambda2 : array_like, shape (N,)

    Returns
    -------
    numpy.ndarray, shape (N, 2, J, 2, 2)
        ``out[i, x, j, b, e]`` is the amplitude of |b, e> after projecting
        the ancilla on |x>.  Squared norms over (b, e) sum to |ket|^2 across x.
    """
    kets = np.atleast_2d(np.asarray(kets, dtype=complex))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    lambda2 = np.atleast_1d(np.asarray(lambda2, dtype=float))
    lam = np.sqrt(lambda2)[:, None]
    lam_bar = np.sqrt(np.clip(1 - lambda2, 0, None))[:, None]
    sp = np.sqrt(p)[:, None]
    sq = np.sqrt(np.clip(1 - p, 0, None))[:, None]
    alpha, beta = kets[:, 0][None, :], kets[:, 1][None, :]
    out = np.zeros((p.size, 2, kets.shape[0], 2, 2), dtype=complex)
    out[:, 0, :, 0, 0] = alpha * lam
    out[:, 0, :, 0, 1] = beta * lam_bar * sq
    out[:, 0, :, 1, 0] = beta * lam_bar * sp
    out[:, 1, :, 0, 1] = alpha * lam_bar * sp
    out[:, 1, :, 1, 0] = alpha * lam_bar * sq
    out[:, 1, :, 1, 1] = beta * lam
    return out


class ProbeOutput(NamedTuple):
    """Normalized Bob-Eve state of one probe branch and its squared norm."""

    state: np.ndarray
    weight: float

    @property
    def vector(self):
        return self.state * math.sqrt(self.weight)


def apply_probe_map(ket, probe, params):
    """Bob-Eve state produced when Eve's probe photon has polarization ``probe``.

    The weight is the probability of that ancilla branch; for equatorial
    inputs both branches carry weight 1/2.
    """
    if probe not in (0, 1):
        raise ValueError(f"probe bit must be 0 or 1, got {probe!r}")
    ket = check_ket(ket, n_qubits=1)
    amp = branch_amplitudes(ket[None, :], params.p, params.lambda2)[0, probe, 0].ravel()
    weight = float(np.vdot(amp, amp).real)
    state = amp / math.sqrt(weight) if weight > 0 else amp
    return ProbeOutput(state, weight)


def bob_eve_state(ket, params):
    """Two-qubit (Bob, Eve) density matrix after cloning a pure input."""
    ket = check_ket(ket, n_qubits=1, normalized=True)
    branches = [apply_probe_map(ket, x, params) for x in (0, 1)]
    if all(b.weight == 0 for b in branches):
        raise ValueError("both probe branches vanish")
    return sum(b.weight * ket_to_dm(b.state) for b in branches if b.weight > 0)


def full_unitary_state(ket, params):
    """Three-qubit (Bob, Eve, ancilla) output of the cloning unitary."""
    alpha, beta = check_ket(ket, n_qubits=1, normalized=True)
    lam, lam_bar = params.lam, params.lam_bar
    sp, sq = math.sqrt(params.p), math.sqrt(params.q)
    out = np.zeros(8, dtype=complex)

    def idx(b, e, c):
        return 4 * b + 2 * e + c

    out[idx(0, 0, 0)] += alpha * lam
    out[idx(0, 1, 1)] += alpha * lam_bar * sp
    out[idx(1, 0, 1)] += alpha * lam_bar * sq
    out[idx(1, 1, 1)] += beta * lam
    out[idx(1, 0, 0)] += beta * lam_bar * sp
    out[idx(0, 1, 0)] += beta * lam_bar * sq
    return out


def traced_unitary_state(ket, params):
    """Bob-Eve state obtained by tracing the ancilla of the full unitary."""
    psi = full_unitary_state(ket, params)
    return partial_trace(np.outer(psi, psi.conj()), keep=(0, 1))


# --------------------------------------------------------------------------
# Optical implementation: PDBS two-photon interference + BDA filtering.
# --------------------------------------------------------------------------

class SingularOpticsError(ValueError):
    """PDBS transmittances at which the filter ratios diverge."""


@dataclass(frozen=True)
class OpticalModel:
    """PDBS transmittances for H (``mu``) and V (``nu``) polarization."""

    mu: float
    nu: float

    def __post_init__(self):
        for name in ("mu", "nu"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")

    @classmethod
    def preset(cls, name):
        try:
            return OPTICS_PRESETS[name.lower()]
        except KeyError:
            raise ValueError(f"unknown optics preset {name!r}; choose from {sorted(OPTICS_PRESETS)}") from None


OPTICS_PRESETS = {
    "measured": OpticalModel(0.77, 0.19),
    "ideal": OpticalModel((1 + 1 / math.sqrt(3)) / 2, (1 - 1 / math.sqrt(3)) / 2),
}


class BdaRatios(NamedTuple):
    """Intensity-transmittance ratios tau_H / tau_V in Bob's and Eve's mode."""

    bob: float
    eve: float
    finite: bool


def _ratio(num, den):
    if den == 0.0:
        return math.nan if num == 0.0 else math.inf
    return num / den


def _check_optics(optics):
    if abs(optics.mu - 0.5) < 1e-12 or abs(optics.nu - 0.5) < 1e-12:
        raise SingularOpticsError("singular PDBS: mu or nu equals 1/2")


def bda_settings(params, optics, probe):
    """Filter ratios that set (p, Lambda) for an H (0) or V (1) probe.

    Degenerate strengths (Lambda in {0, 1}) or p in {0, 1} give infinite or
    zero ratios; ``finite`` is then False.
    """
    if probe not in (0, 1):
        raise ValueError(f"probe bit must be 0 or 1, got {probe!r}")
    _check_optics(optics)
    mu, nu = optics.mu, optics.nu
    l2, lb2 = params.lambda2, params.lam_bar**2
    p, q = params.p, params.q
    if probe == 0:
        bob = _ratio(l2, lb2 * p) * (1 - mu) * (1 - nu) / (1 - 2 * mu) ** 2
        eve = _ratio(l2, lb2 * q) * mu * nu / (1 - 2 * mu) ** 2
    else:
        bob = _ratio(lb2 * q, l2) * (2 * nu - 1) ** 2 / (2 * (1 - mu) * (1 - nu))
        eve = _ratio(lb2 * p, l2) * (2 * nu - 1) ** 2 / (mu * nu)
    finite = all(math.isfinite(r) and r > 0 for r in (bob, eve))
    return BdaRatios(bob, eve, finite)


def _coincidence_amplitudes(optics, probe):
    """Moduli of the post-selected one-photon-per-mode amplitudes.

    Returns a (2, 2, 2) array ``a[s, b, e]``: amplitude of Bob polarization
    ``b`` and Eve polarization ``e`` given signal polarization ``s``.
    Relative phases are assumed compensated by the wave plates.
    """
    mu, nu = optics.mu, optics.nu
    a = np.zeros((2, 2, 2))
    if probe == 0:
        a[0, 0, 0] = abs(1 - 2 * mu)
        a[1, 0, 1] = math.sqrt(mu * nu)
        a[1, 1, 0] = math.sqrt((1 - mu) * (1 - nu))
    else:
        a[0, 0, 1] = math.sqrt((1 - mu) * (1 - nu))
        a[0, 1, 0] = math.sqrt(mu * nu)
        a[1, 1, 1] = abs(2 * nu - 1)
    return a


def filter_transmittances(params, optics, probe):
    """Intensity transmittances (tau_bH, tau_bV, tau_eH, tau_eV) of the BDAs.

    Ratios are solved from the coincidence amplitudes so that the filtered
    state is the target probe branch; in each mode the larger transmittance
    is 1.
    """
    _check_optics(optics)
    a = _coincidence_amplitudes(optics, probe)
    target = branch_amplitudes(
        np.array([[1.0, 0.0], [0.0, 1.0]]), params.p, params.lambda2
    )[0, probe].real
    if probe == 0:
        # pairs sharing Eve's H photon fix Bob's ratio and vice versa
        r_bob = _ratio(target[0, 0, 0] ** 2 * a[1, 1, 0] ** 2, target[1, 1, 0] ** 2 * a[0, 0, 0] ** 2)
        r_eve = _ratio(target[0, 0, 0] ** 2 * a[1, 0, 1] ** 2, target[1, 0, 1] ** 2 * a[0, 0, 0] ** 2)
    else:
        r_bob = _ratio(target[0, 0, 1] ** 2 * a[1, 1, 1] ** 2, target[1, 1, 1] ** 2 * a[0, 0, 1] ** 2)
        r_eve = _ratio(target[0, 1, 0] ** 2 * a[1, 1, 1] ** 2, target[1, 1, 1] ** 2 * a[0, 1, 0] ** 2)

    def normalize(r):
        if math.isnan(r):
            return 1.0, 1.0
        if r >= 1:
            return 1.0, (0.0 if math.isinf(r) else 1.0 / r)
        return r, 1.0

    return (*normalize(r_bob), *normalize(r_eve))


def filtered_output(ket, params, optics, probe):
    """Unnormalized Bob-Eve amplitudes after PDBS and BDAs for one probe."""
    ket = check_ket(ket, n_qubits=1)
    a = _coincidence_amplitudes(optics, probe)
    t_bh, t_bv, t_eh, t_ev = np.sqrt(filter_transmittances(params, optics, probe))
    t_b = np.array([t_bh, t_bv])
    t_e = np.array([t_eh, t_ev])
    amp = np.einsum("s,sbe->be", ket, a) * t_b[:, None] * t_e[None, :]
    return amp.ravel()


def success_probability(params, optics, protocol="r04"):
    """Post-selection success rate p_s = (p_0 + p_1)/2.

    ``p_x`` is the coincidence probability for probe ``x`` averaged over the
    protocol's equatorial input states.
    """
    kets = alphabet(protocol, "alice")
    p_x = []
    for probe in (0, 1):
        rates = [np.vdot(v, v).real for v in (filtered_output(k, params, optics, probe) for k in kets)]
        p_x.append(float(np.mean(rates)))
    return 0.5 * (p_x[0] + p_x[1])


def loss_db(p_s):
    """Loss in dB equivalent to a transmission probability ``p_s``."""
    if not 0 < p_s <= 1:
        raise ValueError("p_s must lie in (0, 1]")
    return -10 * math.log10(p_s)
