"""Seeded Monte Carlo runs of the sifted protocol under the cloning attack.

Each round draws Alice's state, Eve's probe polarization and the public
announcement uniformly.  Rounds whose announcement leaves Alice's bit
undefined are discarded; for the rest, Bob's and Eve's bits are drawn from
the announcement-conditioned block of the analytic joint distribution.

Rounds are split into shards, each driven by its own counter-based Philox
stream keyed on (seed, shard), so the merged counts do not depend on how
many workers execute the shards.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cloner import ClonerParams
from .eavesdropper import joint_distribution, mixed_states
from .protocols import get_protocol
from .qstate import check_density_matrix, purity
from .security import SecurityReport, _metrics

DEFAULT_SHARDS = 8
BOOTSTRAP_RESAMPLES = 1000
MIN_SIFTED = 100


@dataclass(frozen=True)
class RunConfig:
    """Schedule of one Monte Carlo run.

    Parameters
    ----------
    protocol : str
    params : ClonerParams
    rounds : int
        Number of rounds, or of sifted rounds when ``sifted`` is True.
    seed : int
        64-bit seed.
    noise : float
        Weight of the white-noise (I/4) admixture in every Bob-Eve state.
    sifted : bool
        Interpret ``rounds`` as a target number of conclusive rounds.
    shards : int
        Independent random streams the run is partitioned into.
    """

    protocol: str
    params: ClonerParams
    rounds: int
    seed: int = 0
    noise: float = 0.0
    sifted: bool = False
    shards: int = DEFAULT_SHARDS

    def __post_init__(self):
        errors = []
        if int(self.rounds) < 1:
            errors.append("rounds must be at least 1")
        if not 0 <= self.seed < 2**64:
            errors.append("seed must be a 64-bit unsigned integer")
        if not 0.0 <= self.noise <= 1.0:
            errors.append("noise weight must lie in [0, 1]")
        if int(self.shards) < 1:
            errors.append("shards must be at least 1")
        if errors:
            raise ValueError("; ".join(errors))
        get_protocol(self.protocol)


@dataclass
class EmpiricalResult:
    """Counts from one run.

    ``block_counts[x, c, k, l, m]`` splits ``joint_counts`` by probe and
    announcement.
    """

    config: RunConfig
    rounds: int
    sifted_count: int
    joint_counts: np.ndarray
    block_counts: np.ndarray
    report: SecurityReport = field(repr=False, default=None)

    def serialize(self):
        """Canonical bytes used for reproducibility checks."""
        payload = {
            "protocol": self.config.protocol,
            "p": self.config.params.p,
            "lambda2": self.config.params.lambda2,
            "seed": self.config.seed,
            "noise": self.config.noise,
            "rounds": self.rounds,
            "sifted": self.sifted_count,
            "blocks": self.block_counts.ravel().tolist(),
        }
        return json.dumps(payload, sort_keys=True).encode()

    def fingerprint(self):
        return hashlib.sha256(self.serialize()).hexdigest()

    def write_counts(self, path, delimiter="\t"):
        with open(path, "w") as fh:
            fh.write(delimiter.join(("k", "l", "m", "count")) + "\n")
            for (k, l, m), n in np.ndenumerate(self.joint_counts):
                fh.write(delimiter.join(map(str, (k, l, m, int(n)))) + "\n")


def analytic_blocks(protocol, params, noise=0.0):
    """Per-(probe, announcement) tables the sampler draws from."""
    if noise:
        return joint_distribution(protocol, params, states=mixed_states(protocol, params, noise)).blocks
    return joint_distribution(protocol, params).blocks


def _lookup(spec):
    """alice_bit as an integer table, -1 for inconclusive pairs."""
    table = np.full((spec.n_alice, spec.n_contexts), -1, dtype=np.int64)
    for j in range(spec.n_alice):
        for c in spec.contexts:
            bit = spec.alice_bit(j, c)
            if bit is not None:
                table[j, c] = bit
    return table


def _draw(rng, n, spec, bits, cdf):
    j = rng.integers(spec.n_alice, size=n)
    x = rng.integers(2, size=n)
    c = rng.integers(spec.n_contexts, size=n)
    u = rng.random(size=n)
    k = bits[j, c]
    keep = k >= 0
    x, c, k, u = x[keep], c[keep], k[keep], u[keep]
    lm = (u[:, None] >= cdf[x, c, k][:, :3]).sum(axis=1)
    return keep, x, c, k, lm


def _shard(config, index, quota):
    spec = get_protocol(config.protocol)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, index])))
    blocks = analytic_blocks(spec, config.params, config.noise)
    cond = blocks.reshape(2, spec.n_contexts, 2, 4)
    cond = cond / cond.sum(axis=-1, keepdims=True)
    cdf = np.cumsum(cond, axis=-1)
    cdf[..., -1] = 1.0
    bits = _lookup(spec)
    counts = np.zeros((2, spec.n_contexts, 2, 4), dtype=np.int64)
    drawn = 0
    if not config.sifted:
        keep, x, c, k, lm = _draw(rng, quota, spec, bits, cdf)
        np.add.at(counts, (x, c, k, lm), 1)
        return quota, counts
    remaining = quota
    while remaining > 0:
        n = int(remaining / spec.conclusive_rate * 1.05) + 64
        keep, x, c, k, lm = _draw(rng, n, spec, bits, cdf)
        if keep.sum() > remaining:
            last = np.flatnonzero(keep)[remaining - 1]
            n = int(last) + 1
            x, c, k, lm = x[:remaining], c[:remaining], k[:remaining], lm[:remaining]
        np.add.at(counts, (x, c, k, lm), 1)
        drawn += n
        remaining -= len(x)
    return drawn, counts


def run_rounds(config, workers=1):
    """Execute a run and return its counts and binomial error bars.

    ``workers`` only changes how shards are scheduled; the result is
    identical for any value.
    """
    spec = get_protocol(config.protocol)
    total = int(config.rounds)
    n_sh = min(int(config.shards), total)
    quotas = [total // n_sh + (i < total % n_sh) for i in range(n_sh)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _shard(config, *a), enumerate(quotas)))
    else:
        parts = [_shard(config, i, q) for i, q in enumerate(quotas)]
    rounds = sum(p[0] for p in parts)
    blocks = sum(p[1] for p in parts).reshape(2, spec.n_contexts, 2, 2, 2)
    joint = blocks.sum(axis=(0, 1))
    n = int(joint.sum())
    report = None
    if n:
        freq = joint / n
        q = float(freq[0, 1].sum() + freq[1, 0].sum())
        stderr = {
            "qber": float(np.sqrt(q * (1 - q) / n)),
            "cells": np.sqrt(freq * (1 - freq) / n).tolist(),
        }
        report = SecurityReport.from_table(freq, params=config.params, stderr=stderr)
    return EmpiricalResult(config, rounds, n, joint, blocks, report)


def empirical_report(result, resamples=BOOTSTRAP_RESAMPLES, seed=0):
    """Security figures from empirical frequencies with bootstrap errors.

    Parameters
    ----------
    result : EmpiricalResult or array_like, shape (2, 2, 2)
        Counts; a bare array may hold non-integer weights.
    resamples : int
        Multinomial bootstrap replicates.
    seed : int

    Returns
    -------
    SecurityReport
    """
    if isinstance(result, EmpiricalResult):
        counts, params = result.joint_counts, result.config.params
    else:
        counts, params = np.asarray(result, dtype=float), None
    if counts.shape != (2, 2, 2) or np.any(counts < 0):
        raise ValueError("counts must be a non-negative 2x2x2 table")
    n = counts.sum()
    if n < MIN_SIFTED:
        raise ValueError(f"need at least {MIN_SIFTED} sifted rounds, got {n:g}")
    freq = counts / n
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xB007])))
    boot = rng.multinomial(int(round(n)), freq.ravel(), size=resamples).reshape(-1, 2, 2, 2) / round(n)
    names = ("qber", "i_ab", "i_ae", "i_be", "key_rate")
    stderr = {k: float(np.std(v, ddof=1)) for k, v in zip(names, _metrics(boot))}
    return SecurityReport.from_table(freq, params=params, stderr=stderr)


def mixing_weight(rho, target_purity):
    """Weight v with purity(v rho + (1 - v) I/4) equal to the target."""
    rho = check_density_matrix(rho, n_qubits=2)
    p = purity(rho)
    if not 0.25 < target_purity <= p + 1e-12:
        raise ValueError(f"target purity {target_purity} unreachable from purity {p:.6g}")
    return float(np.sqrt((target_purity - 0.25) / (p - 0.25)))


def noise_emulation(rho, target_purity):
    """Mix ``rho`` with white noise to reach ``target_purity``."""
    v = mixing_weight(rho, target_purity)
    rho = np.asarray(rho, dtype=complex)
    return v * rho + (1 - v) * np.eye(4) / 4


def emulated_states(protocol, params, target_purity):
    """Bob-Eve states per (probe, Alice state), each mixed to the target purity."""
    pure = mixed_states(protocol, params, 0.0)
    return np.array([[noise_emulation(r, target_purity) for r in row] for row in pure])
