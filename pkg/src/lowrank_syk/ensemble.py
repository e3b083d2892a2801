"""Seeded random streams and a concurrent runner for disorder realizations."""

# Standard Python Libraries
import asyncio
import logging
from typing import Callable, List, Sequence, TypeVar

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np
from rich.progress import track

from .errors import DomainError

T = TypeVar("T")

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


def realization_stream(seed: int, *keys: int) -> np.random.Generator:
    """
    Return the generator for one (seed, keys...) combination.

    Streams depend only on the master seed and the keys, never on the order
    in which they are requested.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


async def gather_realizations(
    func: Callable[[int, np.random.Generator], T],
    n_realizations: int,
    seed: int,
    workers: int = 1,
    keys: Sequence[int] = (),
    description: str = "Realizations",
) -> List[T]:
    """
    Evaluate func(index, rng) for every realization in worker threads.

    Args:
        func (Callable): The realization, called with its index and stream.
        n_realizations (int): How many realizations to run.
        seed (int): The master seed.
        workers (int): The number of realizations allowed to run at once.
        keys (Sequence[int]): Extra stream keys placed before the index.
        description (str): Label of the progress bar.

    Returns:
        List[T]: The results ordered by realization index.

    Raises:
        DomainError: If workers < 1.
    """
    if workers < 1:
        raise DomainError(f"workers must be at least 1, got {workers}")
    semaphore = asyncio.Semaphore(workers)
    results: List[T] = [None] * n_realizations  # type: ignore[list-item]

    async def run(index: int):
        async with semaphore:
            rng = realization_stream(seed, *keys, index)
            value = await asyncio.to_thread(func, index, rng)
            logger.debug("Finished realization %d of %s", index, description)
            return index, value

    tasks = [asyncio.create_task(run(index)) for index in range(n_realizations)]
    try:
        for future in track(
            asyncio.as_completed(tasks), total=n_realizations, description=description
        ):
            index, value = await future
            results[index] = value
    except BaseException:
        for task in tasks:
            task.cancel()
        raise
    return results
