"""Seeded samplers producing the per-iteration sample sets.

Two schemes: uniform with replacement (the setting of the uniform-sampling
bounds) and epoch partitioning (shuffle once per data pass, cut disjoint
batches, reshuffle every pass).
"""

from __future__ import annotations

import hashlib

import numpy as np

from .problems import SampleSet


def batch_size(N: int, fraction: float) -> int:
    if not 0.0 < fraction <= 1.0:
        raise ValueError("sample fraction must lie in (0, 1]")
    size = round(fraction * N)
    if size < 1:
        raise ValueError(f"fraction {fraction} of N={N} rounds to an empty batch")
    return size


def with_replacement_sampler(N: int, fraction: float, seed):
    """Yield samples of round(fraction*N) indices drawn uniformly with
    replacement.  fraction = 1 yields the full index set in ascending order
    (the deterministic full-sample regime) rather than a random multiset.
    """
    rng = np.random.default_rng(seed)
    size = batch_size(N, fraction)
    full = fraction >= 1.0
    while True:
        if full:
            yield SampleSet(np.arange(N), N)
        else:
            yield SampleSet(rng.integers(0, N, size=size), N)


def epoch_partition_sampler(N: int, fraction: float, seed):
    """Yield floor(N/batch) disjoint batches per pass from a fresh shuffle;
    leftover indices are dropped for that pass.  Successive passes reshuffle.
    """
    rng = np.random.default_rng(seed)
    size = batch_size(N, fraction)
    per_pass = N // size
    while True:
        perm = rng.permutation(N)
        for b in range(per_pass):
            yield SampleSet(perm[b * size : (b + 1) * size], N)


def sample_digest(sample: SampleSet, seed: int) -> str:
    """Short keyed hash of the index sequence, for trace records."""
    key = int(seed).to_bytes(8, "little", signed=True)
    h = hashlib.blake2b(np.ascontiguousarray(sample.indices).tobytes(), key=key, digest_size=8)
    return h.hexdigest()
