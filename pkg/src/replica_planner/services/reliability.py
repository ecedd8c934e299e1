"""
Data-loss probability of a replicated block store under independent node failures.

The analytic model sums over the number of failed machines f: with f of n machines down,
a block whose r replicas sit on a uniformly random r-subset is lost with probability
C(f, r) / C(n, r), and the cluster loses data if any of its b blocks is lost.
`monte_carlo_loss` samples the same process directly and serves as an oracle.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..errors import DomainError
from .policy import optimum_replica_count

log = logging.getLogger(__name__)

# (n, p) -> published loss for the availability-0.99 sweep
PUBLISHED_TABLE2: Dict[Tuple[int, float], float] = {
    (10, 0.01): 0.0043,
    (10, 0.1): 0.0686,
    (10, 0.2): 0.3165,
    (30, 0.01): 0.0286,
    (30, 0.1): 0.2179,
    (30, 0.2): 0.7120,
    (60, 0.01): 0.0456,
    (60, 0.1): 0.2752,
    (60, 0.2): 0.8377,
}

# subset tables above this size fall back to random-key sampling
_MAX_SUBSET_TABLE = 200_000
# elements per sampling array
_MAX_SAMPLE_CELLS = 4_000_000


@dataclass(frozen=True)
class LossModelParams:
    n: int
    p: float
    r: int
    b: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError(f"n must be >= 1 (got {self.n})")
        if math.isnan(self.p) or not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1] (got {self.p})")
        if not 1 <= self.r <= self.n:
            raise DomainError(f"r must lie in [1, n={self.n}] (got {self.r})")
        if math.isnan(self.b) or self.b < 0:
            raise DomainError(f"b must be >= 0 (got {self.b})")


class MonteCarloEstimate(NamedTuple):
    estimate: float
    standard_error: float
    trials: int
    losses: int


@dataclass(frozen=True)
class Table2Row:
    n: int
    alpha: float
    p: float
    r: int
    loss: float
    published: Optional[float] = None


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def data_loss_probability(params: LossModelParams) -> float:
    n, p, r, b = params.n, params.p, params.r, params.b
    if p == 0.0 or b == 0:
        return 0.0
    if p == 1.0:
        # every machine is down, so every block is gone
        return 1.0

    log_p = math.log(p)
    log_q = math.log1p(-p)
    log_all_subsets = _log_comb(n, r)

    # Summing pmf(f) * P(some block lost | f) avoids the 1 - sum(...) cancellation
    # for small losses. f < r contributes nothing.
    terms: List[float] = []
    for failed in range(r, n + 1):
        log_pmf = _log_comb(n, failed) + failed * log_p + (n - failed) * log_q
        hit = math.exp(_log_comb(failed, r) - log_all_subsets)
        if hit >= 1.0:
            any_lost = 1.0
        else:
            any_lost = -math.expm1(b * math.log1p(-hit))
        terms.append(math.exp(log_pmf) * any_lost)

    return min(1.0, max(0.0, math.fsum(terms)))


def _subset_table(n: int, r: int) -> Optional[np.ndarray]:
    if n > 62 or math.comb(n, r) > _MAX_SUBSET_TABLE:
        return None
    masks = [sum(1 << i for i in combo) for combo in itertools.combinations(range(n), r)]
    return np.asarray(masks, dtype=np.int64)


def _chunk_losses(
    params: LossModelParams,
    blocks: int,
    size: int,
    seed: int,
    chunk_index: int,
    table: Optional[np.ndarray],
) -> int:
    rng = np.random.default_rng(np.random.SeedSequence([seed, chunk_index]))
    n, r = params.n, params.r
    dead = rng.random((size, n)) < params.p
    if blocks == 0:
        return 0

    lost = np.zeros(size, dtype=bool)
    if table is not None:
        bit_values = np.left_shift(np.int64(1), np.arange(n, dtype=np.int64))
        alive_bits = (~dead).astype(np.int64) @ bit_values
        step = max(1, _MAX_SAMPLE_CELLS // size)
        for start in range(0, blocks, step):
            width = min(step, blocks - start)
            holder_masks = table[rng.integers(0, len(table), size=(size, width))]
            lost |= ((holder_masks & alive_bits[:, None]) == 0).any(axis=1)
        return int(lost.sum())

    step = max(1, _MAX_SAMPLE_CELLS // (size * n))
    for start in range(0, blocks, step):
        width = min(step, blocks - start)
        keys = rng.random((size, width, n))
        holders = np.argpartition(keys, r - 1, axis=2)[:, :, :r]
        dead_view = np.broadcast_to(dead[:, None, :], (size, width, n))
        lost |= np.take_along_axis(dead_view, holders, axis=2).all(axis=2).any(axis=1)
    return int(lost.sum())


def trial_chunks(trials: int, chunk_size: int, n: int) -> List[int]:
    """
    Split `trials` into chunks no larger than `chunk_size`, shrunk further so one
    chunk's per-node draws stay within _MAX_SAMPLE_CELLS.
    """
    size = max(1, min(chunk_size, _MAX_SAMPLE_CELLS // n))
    return [min(size, trials - start) for start in range(0, trials, size)]


def monte_carlo_loss(
    params: LossModelParams,
    trials: int,
    seed: int,
    workers: int = 1,
    chunk_size: int = 50_000,
) -> MonteCarloEstimate:
    """
    Kill each node with probability p, scatter b blocks on random r-subsets, count trials
    with a fully dead block. Randomness is drawn per chunk from (seed, chunk index), so
    the estimate does not depend on `workers`.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1 (got {trials})")
    if chunk_size < 1:
        raise DomainError(f"chunk_size must be >= 1 (got {chunk_size})")
    if not float(params.b).is_integer():
        raise DomainError(f"Monte Carlo needs an integer block count (got b={params.b})")
    blocks = int(params.b)
    table = _subset_table(params.n, params.r)

    sizes = trial_chunks(trials, chunk_size, params.n)

    def _run(item: Tuple[int, int]) -> int:
        index, size = item
        losses = _chunk_losses(params, blocks, size, seed, index, table)
        log.debug("chunk %d: %d/%d lost", index, losses, size)
        return losses

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            total = sum(pool.map(_run, enumerate(sizes)))
    else:
        total = sum(map(_run, enumerate(sizes)))

    estimate = total / trials
    stderr = math.sqrt(estimate * (1.0 - estimate) / trials)
    return MonteCarloEstimate(estimate, stderr, trials, total)


def table2_blocks(n: int, blocks_per_node: float = 1280, avg_replicas: float = 3) -> float:
    """
    Block count under the "each machine holds blocks_per_node / r_avg blocks" assumption.
    """
    return n * blocks_per_node / avg_replicas


def table2_sweep(
    alpha: float = 0.99,
    node_counts: Sequence[int] = (10, 30, 60),
    failure_probabilities: Sequence[float] = (0.01, 0.1, 0.2),
    blocks_per_node: float = 1280,
    avg_replicas: float = 3,
) -> List[Table2Row]:
    rows: List[Table2Row] = []
    for n in node_counts:
        for p in failure_probabilities:
            decision = optimum_replica_count(alpha, [p], max_replicas=n)
            params = LossModelParams(
                n=n, p=p, r=decision.replica_count, b=table2_blocks(n, blocks_per_node, avg_replicas)
            )
            rows.append(
                Table2Row(
                    n=n,
                    alpha=alpha,
                    p=p,
                    r=decision.replica_count,
                    loss=data_loss_probability(params),
                    published=PUBLISHED_TABLE2.get((n, p)),
                )
            )
    return rows
