import numpy as np
import pytest

from fvib.data import synth_blobs
from fvib.simplex import build_target_matrix


@pytest.fixture(params=[2, 3, 5, 10])
def target_matrix(request):
    return build_target_matrix(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def blobs():
    return synth_blobs(3, 40, dim=4, spread=0.5, seed=0)


@pytest.fixture
def desk_config(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(
        "data: {d: 3, per_class: 40, dim: 4, spread: 0.5}\n"
        "model: {hidden: [16, 16]}\n"
        "train: {epochs: 5, batch_size: 30}\n"
    )
    return path


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
