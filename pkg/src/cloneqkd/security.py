"""Mutual informations, secret-key rate and the optimal cloning attack."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .cloner import ClonerParams, success_probability
from .eavesdropper import JointDistribution, joint_distribution, joint_tables
from .protocols import get_protocol

GRID_STEP = 0.005
KEY_RATE_TOL = 1e-6
TIE_TOL = 1e-9
ZERO_KEY_ATOL = 1e-12


def binary_entropy(d):
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -d * np.log2(d) - (1 - d) * np.log2(1 - d)
    return np.where((d <= 0) | (d >= 1), 0.0, h)


def _mi_2x2(joint):
    """Mutual information (bits) of 2x2 tables, batched over leading axes."""
    px = joint.sum(axis=-1, keepdims=True)
    py = joint.sum(axis=-2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = joint * np.log2(joint / (px * py))
    return np.where(joint > 0, terms, 0.0).sum(axis=(-2, -1))


def mutual_information(dist, pair=("A", "B")):
    """I(X;Y) in bits between two of the parties "A", "B", "E"."""
    if isinstance(dist, JointDistribution):
        return float(_mi_2x2(dist.pair(pair)))
    table = np.asarray(dist, dtype=float)
    axes = {"A": 0, "B": 1, "E": 2}
    a, b = (axes[s.upper()] for s in pair)
    if table.shape == (2, 2):
        return float(_mi_2x2(table))
    m = table.sum(axis=3 - a - b)
    return float(_mi_2x2(m if a < b else m.T))


def _metrics(tables):
    """(qber, i_ab, i_ae, i_be, key_rate) for tables of shape (N, 2, 2, 2)."""
    qber = tables[:, 0, 1].sum(axis=-1) + tables[:, 1, 0].sum(axis=-1)
    i_ab = _mi_2x2(tables.sum(axis=3))
    i_ae = _mi_2x2(tables.sum(axis=2))
    i_be = _mi_2x2(tables.sum(axis=1))
    key = i_ab - np.minimum(i_ae, i_be)
    return qber, i_ab, i_ae, i_be, key


@dataclass(frozen=True)
class SecurityReport:
    qber: float
    i_ab: float
    i_ae: float
    i_be: float
    key_rate: float
    params: ClonerParams | None = None
    p_s: float | None = None
    stderr: dict | None = None

    @classmethod
    def from_table(cls, table, params=None, p_s=None, stderr=None):
        values = _metrics(np.asarray(table, dtype=float)[None])
        return cls(*(float(v[0]) for v in values), params=params, p_s=p_s, stderr=stderr)

    def as_dict(self):
        d = asdict(self)
        if self.params is not None:
            d["params"] = {"p": self.params.p, "lambda2": self.params.lambda2}
        return d


def analyze(protocol, params, optics=None):
    """Security figures of one attack configuration."""
    dist = joint_distribution(protocol, params)
    p_s = None
    if optics is not None:
        p_s = success_probability(params, optics, get_protocol(protocol).kind)
    return SecurityReport.from_table(dist.table, params=params, p_s=p_s)


def evaluate_grid(protocol, p, lambda2):
    """Vectorized metrics over arrays of (p, Lambda^2)."""
    p = np.asarray(p, dtype=float).ravel()
    lambda2 = np.asarray(lambda2, dtype=float).ravel()
    return _metrics(joint_tables(protocol, p, lambda2))


def _point(protocol, z):
    p, l2 = np.clip(z, 0.0, 1.0)
    return [v[0] for v in evaluate_grid(protocol, [p], [l2])]


def _grid(step):
    n = int(round(1 / step))
    return np.linspace(0.0, 1.0, n + 1)


def _polish_on_constraint(protocol, p, l2, fn, tol):
    """Move Lambda^2 at fixed p onto a root of ``fn`` if one is bracketed nearby."""
    for width in (1e-4, 1e-3, 1e-2, 5e-2):
        lo, hi = max(0.0, l2 - width), min(1.0, l2 + width)
        f_lo, f_hi = fn(p, lo), fn(p, hi)
        if f_lo * f_hi < 0:
            return p, brentq(lambda t: fn(p, t), lo, hi, xtol=1e-14, rtol=1e-14)
    return p, l2


def optimize_attack(protocol, step=GRID_STEP, tol=KEY_RATE_TOL):
    """Cloner settings maximizing I(A;B) subject to a zero key rate.

    A grid scan locates the best point with key_rate <= 0; SLSQP then
    refines it with the two constraints I(A;E) >= I(A;B) and
    I(B;E) >= I(A;B).

    Returns
    -------
    (ClonerParams, SecurityReport)
    """
    spec = get_protocol(protocol)
    g = _grid(step)
    pp, ll = np.meshgrid(g, g, indexing="ij")
    qber, i_ab, _, _, key = evaluate_grid(spec, pp, ll)
    feasible = key <= 1e-12
    if not feasible.any():
        raise RuntimeError("no grid point has a non-positive key rate")
    best = np.max(i_ab[feasible])
    cand = np.flatnonzero(feasible & (i_ab >= best - TIE_TOL))
    order = np.lexsort((pp.ravel()[cand], qber[cand]))
    z0 = np.array([pp.ravel()[cand[order[0]]], ll.ravel()[cand[order[0]]]])

    def objective(z):
        return -_point(spec, z)[1]

    constraints = [
        {"type": "ineq", "fun": lambda z: _point(spec, z)[2] - _point(spec, z)[1]},
        {"type": "ineq", "fun": lambda z: _point(spec, z)[3] - _point(spec, z)[1]},
    ]
    res = minimize(
        objective, z0, method="SLSQP", bounds=[(0, 1), (0, 1)],
        constraints=constraints, options={"ftol": 1e-15, "maxiter": 500},
    )
    z = np.clip(res.x, 0.0, 1.0)
    if abs(_point(spec, z)[4]) > tol or _point(spec, z)[1] < best - 1e-9:
        z = _polish_on_constraint(spec, *z0, lambda a, b: _point(spec, (a, b))[4], tol)
    params = ClonerParams.from_lambda2(*z)
    return params, analyze(spec, params)


def privacy_bound(protocol, step=GRID_STEP):
    """Smallest QBER on the curve I(A;B) = I(A;E).

    The curve is located on the grid by sign changes of I(A;B) - I(A;E)
    along both axes, each crossing bracketed to 1e-10.  The minimum over
    the crossings is then refined by following the curve locally.

    Returns
    -------
    (float, ClonerParams)
    """
    spec = get_protocol(protocol)
    g = _grid(step)

    def gap(p, l2):
        _, i_ab, i_ae, _, _ = _point(spec, (p, l2))
        return i_ab - i_ae

    def qber_at(p, l2):
        return _point(spec, (p, l2))[0]

    pp, ll = np.meshgrid(g, g, indexing="ij")
    _, i_ab, i_ae, _, _ = evaluate_grid(spec, pp, ll)
    d = (i_ab - i_ae).reshape(pp.shape)

    roots = [(g[i], g[j]) for i, j in zip(*np.nonzero(d == 0.0))]
    for i, j in zip(*np.nonzero(d[:-1] * d[1:] < 0)):
        l2 = g[j]
        roots.append((brentq(lambda t: gap(t, l2), g[i], g[i + 1], xtol=1e-10), l2))
    for i, j in zip(*np.nonzero(d[:, :-1] * d[:, 1:] < 0)):
        p = g[i]
        roots.append((p, brentq(lambda t: gap(p, t), g[j], g[j + 1], xtol=1e-10)))
    if not roots:
        raise RuntimeError("I(A;B) = I(A;E) has no crossing on the grid")
    q_roots = [qber_at(*r) for r in roots]
    best = int(np.argmin(q_roots))
    candidates = [(q_roots[best], *roots[best])]
    p0, l0 = roots[best]

    def root_near(fn, centre):
        lo, hi = max(0.0, centre - 2 * step), min(1.0, centre + 2 * step)
        f_lo, f_hi = fn(lo), fn(hi)
        if f_lo * f_hi > 0:
            return None
        return brentq(fn, lo, hi, xtol=1e-12)

    def along_l2(l2):
        p = root_near(lambda t: gap(t, l2), p0)
        return (math.inf, None, l2) if p is None else (qber_at(p, l2), p, l2)

    def along_p(p):
        l2 = root_near(lambda t: gap(p, t), l0)
        return (math.inf, p, None) if l2 is None else (qber_at(p, l2), p, l2)

    for follow, centre in ((along_l2, l0), (along_p, p0)):
        res = minimize_scalar(
            lambda t: follow(t)[0],
            bounds=(max(0.0, centre - step), min(1.0, centre + step)),
            method="bounded", options={"xatol": 1e-10},
        )
        cand = follow(res.x)
        if math.isfinite(cand[0]):
            candidates.append(cand)
    q, p, l2 = min(candidates, key=lambda c: c[0])
    return float(q), ClonerParams.from_lambda2(p, l2)


MAP_COLUMNS = ("p", "lambda2", "qber", "i_ab", "i_ae", "i_be", "key_rate")


@dataclass
class SecurityMap:
    """Dense grid of security figures plus the key_rate = 0 contour."""

    protocol: str
    p: np.ndarray
    lambda2: np.ndarray
    values: dict
    contours: list

    def rows(self):
        pp, ll = np.meshgrid(self.p, self.lambda2, indexing="ij")
        cols = [pp.ravel(), ll.ravel()] + [self.values[c].ravel() for c in MAP_COLUMNS[2:]]
        return np.column_stack(cols)

    def write_table(self, path, delimiter="\t"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            w.writerow(MAP_COLUMNS)
            for row in self.rows():
                w.writerow([f"{v:.6g}" for v in row])

    def write_contours(self, path, delimiter="\t"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            w.writerow(("p", "lambda2"))
            for i, line in enumerate(self.contours):
                if i:
                    fh.write("\n")
                for p, l2 in line:
                    w.writerow([f"{p:.6g}", f"{l2:.6g}"])


def _zero_contours(values, xs, ys, fn=None):
    """Polylines where ``values`` (indexed [x, y]) crosses zero.

    Marching-squares vertices lie on grid edges; when ``fn(x, y)`` is given
    each vertex is moved onto the exact root along its edge.
    """
    from skimage.measure import find_contours

    lines = []
    for c in find_contours(values, 0.0):
        px = np.interp(c[:, 0], np.arange(len(xs)), xs)
        py = np.interp(c[:, 1], np.arange(len(ys)), ys)
        if fn is not None:
            for n, (u, v) in enumerate(c):
                px[n], py[n] = _refine_vertex(fn, u, v, xs, ys, values)
        lines.append(np.column_stack([px, py]))
    return lines


def _refine_vertex(fn, u, v, xs, ys, values):
    i, j = int(np.floor(u)), int(np.floor(v))
    x = np.interp(u, np.arange(len(xs)), xs)
    y = np.interp(v, np.arange(len(ys)), ys)
    if u == i and j + 1 < len(ys) and values[i, j] * values[i, j + 1] < 0:
        return xs[i], brentq(lambda t: fn(xs[i], t), ys[j], ys[j + 1], xtol=1e-13)
    if v == j and i + 1 < len(xs) and values[i, j] * values[i + 1, j] < 0:
        return brentq(lambda t: fn(t, ys[j]), xs[i], xs[i + 1], xtol=1e-13), ys[j]
    return x, y


def security_map(protocol, resolution=201, refine=True):
    """Evaluate the attack on a regular (p, Lambda^2) grid over [0, 1]^2.

    Parameters
    ----------
    resolution : int or (int, int)
        Number of grid points per axis (at least 2).
    refine : bool
        Root-polish each contour vertex along its grid edge instead of
        keeping the linear interpolation.
    """
    spec = get_protocol(protocol)
    n_p, n_l = (resolution, resolution) if np.isscalar(resolution) else resolution
    if n_p < 2 or n_l < 2:
        raise ValueError("grid resolution must be at least 2 per axis")
    gp = np.linspace(0.0, 1.0, int(n_p))
    gl = np.linspace(0.0, 1.0, int(n_l))
    pp, ll = np.meshgrid(gp, gl, indexing="ij")
    metrics = evaluate_grid(spec, pp, ll)
    values = {name: v.reshape(pp.shape) for name, v in zip(MAP_COLUMNS[2:], metrics)}
    # R <= 0 means no key; snapping round-off around exact zeros (edges where
    # nobody learns anything) keeps those plateaus out of the contour
    def snapped(k):
        return np.where(np.abs(k) < ZERO_KEY_ATOL, -ZERO_KEY_ATOL, k)

    def key_at(p, l2):
        return float(snapped(_point(spec, (p, l2))[4]))

    contours = _zero_contours(snapped(values["key_rate"]), gp, gl, key_at if refine else None)
    return SecurityMap(spec.kind, gp, gl, values, contours)
