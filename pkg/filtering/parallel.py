# filtering/parallel.py
"""Bounded, order-preserving worker pool for seed-parallel jobs."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

from .exceptions import ContractError

logger = logging.getLogger(__name__)


def seed_seq(base_seed, n_seeds):
    """Seeds base_seed, base_seed + 1, ... for independent Monte-Carlo repetitions"""
    if n_seeds < 1:
        raise ContractError(f"n_seeds must be positive, got {n_seeds}")
    return [int(base_seed) + j for j in range(n_seeds)]


def seed_map(fn, seeds, threads=1):
    """
    Apply fn to every seed and return results in seed order.
    Each job draws its own keyed noise, so results do not depend on `threads`.
    """
    seeds = list(seeds)
    threads = max(1, int(threads or 1))
    if threads == 1 or len(seeds) < 2:
        return [fn(seed) for seed in seeds]

    logger.debug(f"Dispatching {len(seeds)} seeds to {threads} worker threads")
    with ThreadPoolExecutor(max_workers=min(threads, len(seeds))) as pool:
        return list(pool.map(fn, seeds))
