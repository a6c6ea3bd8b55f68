"""Two-qubit state tomography: simulated counts and maximum-likelihood fits.

Projectors are products of single-qubit polarization states, labeled by
two letters from H, V, D, A, R, L (Bob's qubit first).  Counts follow
Poisson statistics.  The reconstruction runs the R rho R fixed-point
iteration from the maximally mixed state, diluting the step whenever the
plain update would lower the likelihood, and finishes with a quasi-Newton
polish on a Cholesky-like factor rho = T T^dag / tr(T T^dag).  Only steps
that raise the likelihood are accepted, so the recorded history is
monotone.
"""

from __future__ import annotations

import csv
import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .qstate import check_density_matrix

_S = 1 / np.sqrt(2)
SINGLE_QUBIT_STATES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}
DIM = 4
POLISH_SCALE = 1e8


class TomographyWarning(UserWarning):
    pass


def projector_from_label(label):
    """Two-qubit product ket for a label such as "HD"."""
    if len(label) != 2 or any(c not in SINGLE_QUBIT_STATES for c in label.upper()):
        raise ValueError(f"bad projector label {label!r}")
    a, b = (SINGLE_QUBIT_STATES[c] for c in label.upper())
    return np.kron(a, b)


def default_projectors():
    """The 36 products of the six Pauli eigenstates, as (label, ket) pairs."""
    return [(a + b, projector_from_label(a + b)) for a, b in itertools.product("HVDARL", repeat=2)]


@dataclass(frozen=True)
class CountRecord:
    label: str | None
    projector: np.ndarray
    expected: float
    observed: int

    def __post_init__(self):
        if self.observed < 0:
            raise ValueError("observed counts must be non-negative")
        if abs(np.vdot(self.projector, self.projector).real - 1) > 1e-10:
            raise ValueError("projector ket is not normalized")


@dataclass
class CountSet:
    """Sequence of CountRecord plus any warnings raised while building it."""

    records: list
    warnings: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def kets(self):
        return np.array([r.projector for r in self.records])

    @property
    def observed(self):
        return np.array([r.observed for r in self.records], dtype=float)

    def write(self, path, delimiter="\t"):
        """Write (label, observed) rows; every record needs a label."""
        if any(r.label is None for r in self.records):
            raise ValueError("only labeled projectors can be serialized")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            w.writerow(("projector", "observed"))
            for r in self.records:
                w.writerow((r.label, r.observed))

    @classmethod
    def read(cls, path, delimiter="\t"):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
        if not rows or [c.strip() for c in rows[0]] != ["projector", "observed"]:
            raise ValueError(f"{path}: missing 'projector, observed' header")
        records = [
            CountRecord(label, projector_from_label(label), float("nan"), int(obs))
            for label, obs in rows[1:]
        ]
        return cls(records, _completeness_warnings(np.array([r.projector for r in records])))


def _operators(kets):
    return np.einsum("ki,kj->kij", kets, kets.conj())


def is_informationally_complete(kets):
    ops = _operators(np.asarray(kets, dtype=complex)).reshape(len(kets), -1)
    return len(kets) >= DIM * DIM and np.linalg.matrix_rank(ops, tol=1e-9) == DIM * DIM


def _completeness_warnings(kets):
    if is_informationally_complete(kets):
        return []
    msg = f"projector set of size {len(kets)} is not informationally complete"
    warnings.warn(msg, TomographyWarning, stacklevel=3)
    return [msg]


def simulate_counts(rho, projectors=None, shots=100_000, seed=None):
    """Poisson counts for each projector.

    Parameters
    ----------
    rho : array_like, shape (4, 4)
    projectors : sequence, optional
        (label, ket) pairs or bare kets; defaults to the 36-element set.
    shots : int
        Mean number of trials per projector.
    seed : int or numpy.random.Generator, optional

    Returns
    -------
    CountSet
    """
    rho = check_density_matrix(rho, n_qubits=2)
    if int(shots) < 1:
        raise ValueError("shots must be at least 1")
    if projectors is None:
        projectors = default_projectors()
    labeled = [p if isinstance(p, tuple) else (None, p) for p in projectors]
    kets = np.array([np.asarray(k, dtype=complex) for _, k in labeled])
    expected = int(shots) * np.clip(np.einsum("ki,ij,kj->k", kets.conj(), rho, kets).real, 0, None)
    rng = np.random.default_rng(seed)
    observed = rng.poisson(expected)
    records = [
        CountRecord(label, ket, float(e), int(o))
        for (label, ket), e, o in zip(labeled, expected, observed)
    ]
    return CountSet(records, _completeness_warnings(kets))


def expected_counts(rho, projectors=None, shots=100_000):
    """Noise-free CountSet whose observed values are the expectations themselves."""
    cs = simulate_counts(rho, projectors, shots, seed=0)
    return CountSet(
        [CountRecord(r.label, r.projector, r.expected, r.expected) for r in cs.records],
        cs.warnings,
    )


@dataclass
class MLResult:
    rho: np.ndarray
    log_likelihood: list
    iterations: int
    converged: bool
    warnings: list = field(default_factory=list)

    @property
    def monotone(self):
        return bool(np.all(np.diff(self.log_likelihood) >= 0))


class _Likelihood:
    """Scale-free Poisson log-likelihood, per detected count."""

    def __init__(self, kets, counts):
        self.ops = _operators(kets)
        self.n = counts
        self.total = counts.sum()
        if self.total <= 0:
            raise ValueError("no counts to reconstruct from")
        self.g = self.ops.sum(axis=0)
        self.g_inv = np.linalg.inv(self.g)
        self.hit = counts > 0

    def probs(self, rho):
        return np.einsum("kij,ji->k", self.ops, rho).real

    def __call__(self, rho):
        pr = self.probs(rho)
        if np.any(pr[self.hit] <= 0):
            return -np.inf
        return float(np.sum(self.n[self.hit] * np.log(pr[self.hit] / pr.sum())) / self.total)

    def r_operator(self, rho):
        pr = self.probs(rho)
        w = np.where(self.hit, self.n / np.where(self.hit, pr, 1.0), 0.0)
        return np.einsum("k,kij->ij", w, self.ops) * pr.sum() / self.total

    def factor_objective(self, z, scale=POLISH_SCALE):
        """Scaled KL divergence of model from data frequencies, with gradient.

        The divergence vanishes at an exact fit, so the optimizer's relative
        stopping test is not limited by the size of the log-likelihood.
        """
        t = (z[:16] + 1j * z[16:]).reshape(DIM, DIM)
        m = t @ t.conj().T
        pr = np.einsum("kij,ji->k", self.ops, m).real
        s = np.sum(pr)
        ph = pr[self.hit]
        if np.any(ph <= 0):
            return np.inf, np.zeros_like(z)
        # sum of non-negative terms keeps relative precision near the optimum
        freq = self.n[self.hit] / self.total
        r = ph / s / freq - 1
        val = np.sum(freq * (r - np.log1p(r))) + np.sum(pr[~self.hit]) / s
        w = np.where(self.hit, self.n / np.where(self.hit, pr, 1.0), 0.0)
        grad = -(np.einsum("k,kij->ij", w, self.ops) - self.total / s * self.g) @ t / self.total
        return scale * val, 2 * scale * np.concatenate([grad.real.ravel(), grad.imag.ravel()])


def _normalize(m):
    m = 0.5 * (m + m.conj().T)
    return m / np.trace(m).real


def ml_reconstruct(counts, max_iter=5000, tol=1e-10, fixed_point_iter=100, polish=True):
    """Maximum-likelihood density matrix from tomographic counts.

    Parameters
    ----------
    counts : CountSet or sequence of CountRecord
    max_iter : int
        Cap on fixed-point iterations plus polish iterations.
    tol : float
        Stop once the per-count log-likelihood gain of one step is below this.
    fixed_point_iter : int
        Fixed-point steps taken before handing over to the polish.
    polish : bool
        Run the quasi-Newton refinement after the fixed-point phase.

    Returns
    -------
    MLResult
    """
    records = list(counts)
    notes = list(getattr(counts, "warnings", []))
    if not notes:
        notes = _completeness_warnings(np.array([r.projector for r in records]))
    kets = np.array([r.projector for r in records], dtype=complex)
    like = _Likelihood(kets, np.array([r.observed for r in records], dtype=float))

    rho = np.eye(DIM, dtype=complex) / DIM
    history = [like(rho)]
    converged = False
    eps = 1.0
    n_fp = min(fixed_point_iter, max_iter) if polish else max_iter
    it = 0
    for it in range(1, n_fp + 1):
        d = like.g_inv @ like.r_operator(rho) - np.eye(DIM)
        step = min(1.0, 2 * eps)
        accepted = None
        while step > 1e-8:
            a = np.eye(DIM) + step * d
            cand = _normalize(a @ rho @ a.conj().T)
            value = like(cand)
            if value >= history[-1]:
                accepted = (cand, value)
                break
            step *= 0.5
        if accepted is None:
            converged = True
            break
        eps = step
        gain = accepted[1] - history[-1]
        rho = accepted[0]
        history.append(accepted[1])
        if gain < tol:
            converged = True
            break

    if polish and not converged:
        w, v = np.linalg.eigh(rho)
        t0 = v * np.sqrt(np.clip(w, 0, None) + 1e-12)
        z0 = np.concatenate([t0.real.ravel(), t0.imag.ravel()])
        budget = max(max_iter - it, 1)
        res = minimize(
            like.factor_objective, z0, jac=True, method="L-BFGS-B",
            options={"maxiter": budget, "ftol": 1e-16, "gtol": 1e-13},
        )
        t = (res.x[:16] + 1j * res.x[16:]).reshape(DIM, DIM)
        cand = _normalize(t @ t.conj().T)
        value = like(cand)
        if value >= history[-1]:
            rho = cand
            history.append(value)
        it += res.nit
        converged = bool(res.success) or res.nit < budget

    if not converged:
        notes.append(f"no convergence within {max_iter} iterations")
        warnings.warn(notes[-1], TomographyWarning, stacklevel=2)
    return MLResult(check_density_matrix(_clean(rho)), history, it, converged, notes)


def _clean(rho):
    """Hermitize and clamp round-off negativity so validation passes."""
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    w = np.clip(w, 0, None)
    out = (v * w) @ v.conj().T
    return out / np.trace(out).real
