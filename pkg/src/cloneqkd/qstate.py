"""Dense linear algebra for one- to three-qubit states.

States are plain numpy arrays: kets are 1-D complex arrays of length 2, 4
or 8, density matrices are square complex arrays of the same sizes.  Qubit
ordering is fixed globally: the leftmost tensor factor is the most
significant bit (Bob, then Eve, then the cloner ancilla).
"""

from __future__ import annotations

import numpy as np

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
EIGEN_FLOOR = -1e-10
ROUNDOFF_RTOL = 8 * np.finfo(float).eps
MAX_QUBITS = 3

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)

KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)


def _n_qubits(dim):
    n = int(round(np.log2(dim))) if dim > 0 else 0
    if dim < 2 or 2**n != dim or n > MAX_QUBITS:
        raise ValueError(f"dimension {dim} is not 2**n for n in 1..{MAX_QUBITS}")
    return n


def check_ket(psi, n_qubits=None, normalized=False):
    """Validate a ket and return it as a complex 1-D array.

    Parameters
    ----------
    psi : array_like
        Amplitudes.
    n_qubits : int, optional
        Required number of qubits.
    normalized : bool
        If True the squared norm must be 1 within 1e-12.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1:
        raise ValueError(f"ket must be 1-D, got shape {psi.shape}")
    n = _n_qubits(psi.shape[0])
    if n_qubits is not None and n != n_qubits:
        raise ValueError(f"expected a {n_qubits}-qubit ket, got {n} qubits")
    if normalized and abs(np.vdot(psi, psi).real - 1.0) > 1e-12:
        raise ValueError("ket is not normalized")
    return psi


def check_density_matrix(rho, n_qubits=None):
    """Validate a density matrix (Hermitian, unit trace, PSD up to the floor)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    n = _n_qubits(rho.shape[0])
    if n_qubits is not None and n != n_qubits:
        raise ValueError(f"expected a {n_qubits}-qubit density matrix, got {n} qubits")
    if not np.allclose(rho, rho.conj().T, atol=HERMITIAN_ATOL, rtol=0):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > TRACE_ATOL:
        raise ValueError(f"density matrix trace is {np.trace(rho).real:.3g}, not 1")
    if np.linalg.eigvalsh(rho).min() < EIGEN_FLOOR:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def ket_to_dm(psi):
    """Return |psi><psi| (no normalization applied)."""
    psi = check_ket(psi)
    return np.outer(psi, psi.conj())


def as_density_matrix(state):
    """Accept a ket or a density matrix and return a validated density matrix."""
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return check_density_matrix(ket_to_dm(check_ket(state, normalized=True)))
    return check_density_matrix(state)


def tensor_product(a, b):
    """Kronecker product of two kets or two density matrices.

    The first operand becomes the most significant (leftmost) factor.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != b.ndim or a.ndim not in (1, 2):
        raise ValueError("operands must both be kets or both be density matrices")
    n = _n_qubits(a.shape[0]) + _n_qubits(b.shape[0])
    if n > MAX_QUBITS:
        raise ValueError(f"product of {n} qubits exceeds the {MAX_QUBITS}-qubit limit")
    return np.kron(a, b)


def partial_trace(rho, keep):
    """Reduce a multi-qubit density matrix onto the qubits in ``keep``.

    Parameters
    ----------
    rho : array_like
        Density matrix of 2 or 3 qubits.
    keep : int or sequence of int
        Indices of the qubits to keep (0 = leftmost).

    Returns
    -------
    numpy.ndarray
        Reduced density matrix, qubits in ascending index order.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    n = _n_qubits(rho.shape[0])
    if n < 2:
        raise ValueError("partial trace needs at least two qubits")
    keep = sorted({keep} if np.isscalar(keep) else set(keep))
    if not keep or any(k < 0 or k >= n for k in keep):
        raise ValueError(f"invalid subsystem selection {keep} for {n} qubits")
    traced = [k for k in range(n) if k not in keep]
    t = rho.reshape([2] * (2 * n))
    # trace the highest index first so the remaining axis numbers stay valid
    for offset, k in enumerate(sorted(traced, reverse=True)):
        m = n - offset
        t = np.trace(t, axis1=k, axis2=k + m)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def bloch_vector(state):
    """Bloch vector of a single-qubit ket or density matrix.

    For a ket the (possibly unnormalized) expectation <psi|sigma|psi> is
    returned, so the vector length carries the squared norm.
    """
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        state = np.outer(state, state.conj())
    if state.shape != (2, 2):
        raise ValueError("Bloch vectors are defined for single qubits only")
    return np.array([np.trace(s @ state).real for s in PAULIS])


def bloch_angles(r):
    """Polar angle theta and azimuth phi of a nonzero Bloch vector."""
    r = np.asarray(r, dtype=float)
    norm = np.linalg.norm(r)
    if norm == 0:
        raise ValueError("the zero vector has no direction")
    # atan2 keeps full precision near the poles, unlike arccos(z)
    theta = float(np.arctan2(np.hypot(r[0], r[1]), r[2]))
    phi = float(np.arctan2(r[1], r[0]))
    return theta, phi


def ket_from_angles(theta, phi):
    """cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>."""
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def ket_from_bloch(r):
    """Pure single-qubit ket with unit Bloch vector ``r``."""
    r = np.asarray(r, dtype=float)
    if abs(np.linalg.norm(r) - 1.0) > 1e-10:
        raise ValueError("a pure state needs a unit Bloch vector")
    return ket_from_angles(*bloch_angles(r))


def density_from_bloch(r):
    """rho = (I + r.sigma)/2 for |r| <= 1."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3,):
        raise ValueError("Bloch vector must have three components")
    if np.linalg.norm(r) > 1 + 1e-10:
        raise ValueError("Bloch vector is longer than 1")
    return 0.5 * (np.eye(2) + sum(c * s for c, s in zip(r, PAULIS)))


def psd_sqrt(rho, rtol=ROUNDOFF_RTOL):
    """Square root of a Hermitian PSD matrix.

    Eigenvalues within the floor are clamped to 0, as are those below
    ``rtol`` times the largest one, which are round-off for rank-deficient
    input.
    """
    w, v = np.linalg.eigh(rho)
    if w.min() < EIGEN_FLOOR:
        raise ValueError("matrix is not positive semidefinite")
    w = np.where(w < rtol * max(w.max(), 0.0), 0.0, w)
    return (v * np.sqrt(w)) @ v.conj().T


def uhlmann_fidelity(rho, sigma):
    """F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))**2.

    Computed as the squared trace norm of sqrt(rho) sqrt(sigma); singular
    values carry absolute rather than square-root round-off, so pure and
    low-rank states keep full precision.
    """
    rho = as_density_matrix(rho)
    sigma = as_density_matrix(sigma)
    if rho.shape != sigma.shape:
        raise ValueError("fidelity of states with different dimensions")
    sv = np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False)
    f = float(np.sum(sv) ** 2)
    return min(max(f, 0.0), 1.0)


def purity(rho):
    """Tr(rho**2)."""
    rho = check_density_matrix(rho)
    return float(np.real(np.einsum("ij,ji->", rho, rho)))


def trace_distance(rho, sigma):
    """Half the trace norm of the difference."""
    d = np.asarray(rho, dtype=complex) - np.asarray(sigma, dtype=complex)
    return float(0.5 * np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())


def equatorial_ket(phase):
    """(|0> + exp(i phase)|1>)/sqrt(2)."""
    return np.array([1.0, np.exp(1j * phase)]) / np.sqrt(2)
