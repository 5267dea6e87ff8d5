import pytest

from tapdetect.synth import SynthConfig, generate_corpus, write_corpus

TINY_SYNTH = SynthConfig(n_participants=3, recording_s=30.0, seed=77)


@pytest.fixture(scope="session")
def tiny_corpus_dir(tmp_path_factory):
    """Small on-disk corpus: 3 participants, 30 s each, annotations.csv."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    recordings = generate_corpus(TINY_SYNTH)
    annotations_path, audio_root = write_corpus(recordings, root)
    return {"root": root, "annotations": annotations_path, "audio_root": audio_root}
