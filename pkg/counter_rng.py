"""
Counter-based random streams.

Every block of particles draws its Gaussian variates from its own Philox
stream whose key is the run seed and whose counter is set to
(0, domain, step, block). The same (seed, domain, step, block) therefore
always produces the same numbers, no matter which worker thread handles the
block or in which order blocks are processed.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple

import numpy as np

from config import RNG_CONFIG


def block_generator(seed: int, domain: int, step: int, block: int) -> np.random.Generator:
    """
    Generator for one (seed, domain, step, block) cell

    Args:
        seed: Run seed (Philox key)
        domain: Stream family, see RNG_CONFIG['domains']
        step: Step index (0 for one-shot draws)
        block: Particle block index

    Returns:
        numpy Generator backed by a freshly positioned Philox bit generator
    """
    counter = np.array([0, domain, step, block], dtype=np.uint64)
    bit_gen = np.random.Philox(key=int(seed) % (1 << 64), counter=counter)
    return np.random.Generator(bit_gen)


def block_slices(n: int, block_size: int = RNG_CONFIG['block_size']) -> List[Tuple[int, slice]]:
    """Fixed partition of n particles into (block index, row slice) pairs"""
    return [(b, slice(start, min(start + block_size, n)))
            for b, start in enumerate(range(0, n, block_size))]


def standard_normals(seed: int, domain: int, step: int, n: int, dim: int,
                     workers: int = 1,
                     block_size: int = RNG_CONFIG['block_size']) -> np.ndarray:
    """
    (n, dim) array of independent standard normals keyed by particle block

    Args:
        seed, domain, step: Stream key
        n: Number of particles (rows)
        dim: Variates per particle
        workers: Threads filling blocks concurrently; does not change the result
        block_size: Particles per keyed block

    Returns:
        Array of shape (n, dim)
    """
    out = np.empty((n, dim))

    def fill(item):
        block, rows = item
        rng = block_generator(seed, domain, step, block)
        out[rows] = rng.standard_normal((rows.stop - rows.start, dim))

    run_blocks(fill, block_slices(n, block_size), workers)
    return out


def run_blocks(fn: Callable, items: list, workers: int = 1) -> None:
    """Apply fn to every item, optionally on a thread pool; blocks write disjoint rows"""
    if workers <= 1 or len(items) <= 1:
        for item in items:
            fn(item)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # list() re-raises the first worker exception
        list(pool.map(fn, items))
