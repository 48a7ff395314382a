import pytest

from mmsynth.config import TrainConfig, config_text
from mmsynth.data import SynthSpec, generate_synth_dataset
from mmsynth.trainer import run_progressive_training


@pytest.fixture(scope="session")
def mini_run(tmp_path_factory):
    """A complete (tiny) progressive run shared by CLI/service tests.

    Returns (checkpoint path, manifest path, config).
    """
    root = tmp_path_factory.mktemp("mini")
    manifest = generate_synth_dataset(
        SynthSpec(resolution=16, samples_per_modality=24, seed=0), root / "data"
    )
    cfg = TrainConfig(
        c=3,
        d_a=3,
        max_resolution=8,
        width_factor=1 / 32,
        batch=4,
        seed=0,
        schedule_scale=12000.0,  # budgets (4, 8)
        fade="linear",
        data_manifest=str(root / "data" / "manifest.txt"),
        out_dir=str(root / "out"),
    )
    (root / "config.txt").write_text(config_text(cfg))
    final, _ = run_progressive_training(cfg, manifest)
    return final, root / "data" / "manifest.txt", cfg
