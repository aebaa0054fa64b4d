import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from blurscope import cnn, evaluation
from blurscope.imageio import synth_dataset

CORPUS_SEED = 7
CORPUS_COUNT = 200
CORPUS_SIGMA = (2.0, 4.0)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    synth_dataset(CORPUS_SEED, CORPUS_COUNT, *CORPUS_SIGMA, out)
    return out


@pytest.fixture(scope="session")
def corpus(corpus_dir):
    from blurscope.imageio import read_labels_csv

    return read_labels_csv(corpus_dir / "labels.csv")


@pytest.fixture(scope="session")
def corpus_split(corpus):
    return evaluation.split_dataset(corpus, 0.8, CORPUS_SEED)


@pytest.fixture(scope="session")
def trained_cnn(corpus_split):
    """Default-config model trained on the 80% split, with its epoch log."""
    history = []
    model = cnn.train(corpus_split.train, cnn.TrainConfig(seed=CORPUS_SEED), on_epoch=history.append)
    return model, history
