import numpy as np
import pytest

from pamc import data, model

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def sbm_accept():
    return data.generate_sbm(**data.SBM_ACCEPT)


@pytest.fixture(scope="session")
def pretrained_accept(sbm_accept):
    params = model.init_autoencoder(sbm_accept.features.shape[1], seed=0)
    params, history = model.pretrain(params, sbm_accept.features, epochs=30, lr=1e-3,
                                     batch_size=256, seed=0)
    return params, history


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def acceptance_report():
    def record(number, name, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {name} {detail}".rstrip())
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
