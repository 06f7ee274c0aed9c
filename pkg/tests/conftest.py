"""Shared test oracles: exact PMF recursions, partition enumeration, and a
per-ball placement reference.  These stay independent of the library code
paths they check."""

import numpy as np


def exact_binomial_pmf(n: int, p: float) -> np.ndarray:
    """PMF of Binomial(n, p) by the forward recursion (independent oracle)."""
    pmf = np.zeros(n + 1)
    pmf[0] = (1.0 - p) ** n
    for k in range(1, n + 1):
        pmf[k] = pmf[k - 1] * (n - k + 1) * p / (k * (1.0 - p))
    return pmf


def partitions(n: int, max_part: int | None = None):
    """All integer partitions of n as cycle-count dicts {part: multiplicity}."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield {}
        return
    for part in range(min(n, max_part), 0, -1):
        for rest in partitions(n - part, part):
            out = dict(rest)
            out[part] = out.get(part, 0) + 1
            yield out


def exact_cycle_type_probs(n: int, theta: float) -> dict:
    """Exact Ewens cycle-type distribution via the sampling formula."""
    from sievesim.ewens import CycleCounts, esf_probability

    return {tuple(sorted(c.items())): esf_probability(CycleCounts(n, theta, c))
            for c in partitions(n)}


def naive_placement(cutpoints: np.ndarray, n: int, gen: np.random.Generator,
                    replicates: int) -> np.ndarray:
    """Per-ball uniform placement: ball with weight U lands in box k iff
    V_k < U <= V_{k-1}.  Returns a (replicates, boxes) count matrix."""
    edges = np.concatenate([[1.0], cutpoints])[::-1]  # increasing for searchsorted
    boxes = len(cutpoints)
    out = np.zeros((replicates, boxes), dtype=np.int64)
    for r in range(replicates):
        u = gen.random(n)
        idx = boxes - np.searchsorted(edges, u, side="left") + 1
        np.add.at(out[r], np.clip(idx, 1, boxes) - 1, 1)
    return out


def empirical_type_tv(samples, exact_probs: dict) -> float:
    """Total variation between empirical cycle-type frequencies and the exact
    distribution."""
    counts = {}
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    total = sum(counts.values())
    keys = set(counts) | set(exact_probs)
    return 0.5 * sum(abs(counts.get(k, 0) / total - exact_probs.get(k, 0.0)) for k in keys)
