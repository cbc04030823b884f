import numpy as np
import pytest

from stallwatch.media import Frame


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_frame(values) -> Frame:
    return Frame(np.asarray(values, dtype=np.uint8))


@pytest.fixture(scope="session")
def acceptance_corpus(tmp_path_factory):
    """The 12-video synthetic corpus, generated once per session."""
    from stallwatch.synth import corpus

    root = tmp_path_factory.mktemp("corpus")
    corpus(root, seed=0)
    return root
