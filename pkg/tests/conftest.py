import numpy as np
import pytest

from motionseg.core import PipelineConfig
from motionseg.dataset import DatasetLayout
from motionseg.synth import SynthParams, synth_sequence, write_dataset

CLEAN_PARAMS = SynthParams()
NOISY_PARAMS = SynthParams(proposal_confidence=0.7, proposal_confidence_jitter=0.25,
                           proposal_erosion=1, outlier_patches=8,
                           background_texture_seed=11)
DISTRACTOR_PARAMS = SynthParams(extra_static_object=True, background_texture_seed=17)
DYNAMIC_BG_PARAMS = SynthParams(dynamic_background=(44, 4, 16, 12),
                                dynamic_noise_amplitude=2.0,
                                background_texture_seed=13)


def _materialize(params, tmp_path_factory, name):
    dataset = synth_sequence(params)
    dirs = write_dataset(dataset, tmp_path_factory.mktemp(name))
    layout = DatasetLayout(frames_dir=dirs["frames"], flow_dir=dirs["flow"],
                           proposals_dir=dirs["proposals"], gt_dir=dirs["gt"])
    return dataset, layout


@pytest.fixture(scope="session")
def clean_set(tmp_path_factory):
    return _materialize(CLEAN_PARAMS, tmp_path_factory, "clean")


@pytest.fixture(scope="session")
def noisy_set(tmp_path_factory):
    return _materialize(NOISY_PARAMS, tmp_path_factory, "noisy")


@pytest.fixture(scope="session")
def distractor_set(tmp_path_factory):
    return _materialize(DISTRACTOR_PARAMS, tmp_path_factory, "distractor")


@pytest.fixture(scope="session")
def dynamic_bg_set(tmp_path_factory):
    return _materialize(DYNAMIC_BG_PARAMS, tmp_path_factory, "dynbg")


@pytest.fixture()
def default_config():
    return PipelineConfig()


def random_mask(rng, h, w):
    return (rng.random((h, w)) < 0.4).astype(np.uint8)
