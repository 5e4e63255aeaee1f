import numpy as np
import pytest

from prefbayes.domain import (
    Alternative,
    Criterion,
    Dataset,
    PreferenceRecord,
    Problem,
    load_bundled_problem,
)
from prefbayes.valuefn import PiecewiseConfig

np.seterr(over="ignore")


@pytest.fixture(scope="session")
def problem() -> Problem:
    return load_bundled_problem()


@pytest.fixture(scope="session")
def config2(problem) -> PiecewiseConfig:
    return PiecewiseConfig.shared(problem, 2)


def _build_tiny_problem() -> Problem:
    return Problem(
        criteria=[
            Criterion("g1", "gain one", "gain", 0.0, 10.0),
            Criterion("g2", "cost one", "cost", 0.0, 10.0),
        ],
        alternatives=[Alternative("a", "A"), Alternative("b", "B"), Alternative("c", "C")],
        performances=[[2.0, 8.0], [6.0, 4.0], [9.0, 1.0]],
    )


@pytest.fixture
def tiny_problem() -> Problem:
    return _build_tiny_problem()


@pytest.fixture(scope="module")
def tiny_problem_module() -> Problem:
    return _build_tiny_problem()


@pytest.fixture(scope="class")
def tiny_problem_class() -> Problem:
    return _build_tiny_problem()


def make_record(pair, choice, rt=3.0, att=None, crit_ids=("g1", "g2")):
    if att is None:
        att = {cid: 1.0 for cid in crit_ids}
    return PreferenceRecord(pair=pair, choice=choice, response_time_s=rt, attention_s=att)


@pytest.fixture
def tiny_dataset(tiny_problem) -> Dataset:
    return Dataset(
        problem_ref="tiny",
        records=[
            make_record(("a", "b"), "b"),
            make_record(("b", "c"), "c", rt=5.0),
            make_record(("a", "c"), "c", rt=2.5),
        ],
    )
