import random

import pytest

from pprl.config import LinkageConfig
from pprl.lsh import LshParams
from pprl.records import Dataset, FieldGroupSpec, Record

TEST_SEED = bytes(range(32))


@pytest.fixture
def name_spec():
    return FieldGroupSpec(name="name", members=("first", "last"), shingle_len=3)


@pytest.fixture
def small_specs():
    return (
        FieldGroupSpec(name="name", members=("first", "last"), shingle_len=3),
        FieldGroupSpec(name="place", members=("city",), shingle_len=4),
    )


@pytest.fixture
def small_params():
    return LshParams(bands=6, rows=3, seed=TEST_SEED)


@pytest.fixture
def small_cfg(small_specs, small_params):
    return LinkageConfig(specs=small_specs, params=small_params)


def make_records(n, seed=0, prefix="r"):
    rng = random.Random(seed)
    firsts = ["alice", "bob", "carol", "david", "erin", "frank", "grace", "henry"]
    lasts = ["stone", "rivers", "fields", "woods", "brooks", "hayes", "cross"]
    cities = ["springfield", "rivertown", "lakeside", "fairview", "greenville"]
    records = []
    for i in range(n):
        records.append(
            Record(
                id=f"{prefix}{i}",
                fields={
                    "first": rng.choice(firsts) + str(rng.randrange(100)),
                    "last": rng.choice(lasts) + str(rng.randrange(100)),
                    "city": rng.choice(cities),
                },
            )
        )
    return Dataset(records)
