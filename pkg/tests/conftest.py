import pytest

from keystroke_id import dataset as ds
from keystroke_id import sequencing, synth


@pytest.fixture(scope="session")
def sep5_dataset() -> ds.Dataset:
    """Well-separated 3-user corpus shared by the slower classifier tests."""
    cfg = synth.GenConfig(
        num_users=3,
        sessions_per_user=3,
        keystrokes_per_session=500,
        separation_factor=5.0,
        seed=1234,
    )
    sessions = synth.generate_corpus(cfg)
    return ds.featurize_sessions(sessions, sequencing.WindowConfig(50))
