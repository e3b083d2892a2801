"""Tests for the ensemble module."""

# Standard Python Libraries
import time

# Third-Party Libraries
import numpy as np
import pytest

# cisagov Libraries
from lowrank_syk.ensemble import gather_realizations, realization_stream
from lowrank_syk.errors import DomainError, NumericalError


def test_stream_is_deterministic():
    """Test equal seeds and keys give equal draws."""
    first = realization_stream(7, 2, 5).standard_normal(4)
    second = realization_stream(7, 2, 5).standard_normal(4)
    assert np.array_equal(first, second)


@pytest.mark.parametrize("other", [(8, 2, 5), (7, 5, 2), (7, 2), (7, 2, 6)])
def test_stream_separates_keys(other):
    """Test different seeds or keys give different draws."""
    base = realization_stream(7, 2, 5).standard_normal(4)
    assert not np.array_equal(base, realization_stream(*other).standard_normal(4))


async def test_gather_keeps_index_order():
    """Test results come back ordered by index even when finishing out of order."""

    def realization(index, rng):
        time.sleep(0.01 * (4 - index))
        return index, rng.integers(1 << 30)

    results = await gather_realizations(realization, 5, seed=3, workers=5)
    assert [index for index, _ in results] == [0, 1, 2, 3, 4]
    expected = [realization_stream(3, i).integers(1 << 30) for i in range(5)]
    assert [value for _, value in results] == expected


async def test_gather_uses_extra_keys():
    """Test keys are placed before the realization index."""
    results = await gather_realizations(
        lambda index, rng: rng.random(), 2, seed=3, keys=(9,)
    )
    assert results[1] == realization_stream(3, 9, 1).random()


async def test_gather_rejects_no_workers():
    """Test fewer than one worker is rejected."""
    with pytest.raises(DomainError):
        await gather_realizations(lambda index, rng: index, 2, seed=0, workers=0)


async def test_gather_propagates_errors():
    """Test an exception inside a realization reaches the caller."""

    def realization(index, rng):
        if index == 1:
            raise NumericalError("diagonalization failed")
        return index

    with pytest.raises(NumericalError):
        await gather_realizations(realization, 3, seed=0, workers=2)
