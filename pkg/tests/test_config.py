import pytest

from isimed.config import ExperimentConfig, load_config, parse_config
from isimed.errors import ConfigParseError
from isimed.seeding import derive_seed


def test_defaults_are_desk_scale():
    cfg = load_config()
    assert (cfg.splits.train, cfg.splits.val, cfg.splits.test) == (20, 5, 5)
    assert (cfg.train.volumes_per_batch, cfg.train.patches_per_volume) == (8, 8)
    assert (cfg.train.steps_per_epoch, cfg.train.epochs) == (20, 50)
    assert cfg.train.encoder.input_patch == cfg.train.patch_size


def test_nested_override_keeps_other_defaults():
    cfg = parse_config("[train]\nepochs = 3\n[train.encoder]\nconv_channels = [4, 8]\n")
    default = ExperimentConfig()
    assert cfg.train.epochs == 3
    assert cfg.train.encoder.conv_channels == [4, 8]
    assert cfg.train.patch_size == default.train.patch_size
    assert cfg.train.augment == default.train.augment
    assert cfg.phantom == default.phantom


def test_tuple_fields():
    cfg = parse_config("[phantom]\nshape = [32, 40, 48]\nlesion_radius_range = [1, 3.5]\n")
    assert cfg.phantom.shape == (32, 40, 48)
    assert cfg.phantom.lesion_radius_range == (1.0, 3.5)


def test_seeds_derive_from_master():
    a = load_config(seed=5)
    b = load_config(seed=5)
    c = load_config(seed=6)
    assert a.phantom.seed == b.phantom.seed == derive_seed(5, "phantom")
    assert a.train.seed == derive_seed(5, "train")
    assert a.train.encoder.seed == derive_seed(5, "encoder")
    assert a.phantom.seed != c.phantom.seed
    assert len({a.phantom.seed, a.train.seed, a.train.encoder.seed}) == 3


def test_overrides(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('master_seed = 3\noutput_dir = "x"\n')
    cfg = load_config(path, out=str(tmp_path / "y"))
    assert cfg.master_seed == 3 and cfg.output_dir == str(tmp_path / "y")
    assert load_config(path, seed=9).master_seed == 9


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("[train]\nepochs = 'ten'\n", "train.epochs"),
        ("[phantom]\nseed = 3\n", "seeds derive from master_seed"),
        ("[train.encoder]\nseed = 3\n", "train.encoder.seed"),
        ("[bogus]\nx = 1\n", "bogus"),
        ("[phantom]\nshape = [1, 2]\n", "phantom.shape"),
        ("[analyze]\nsvg = 1\n", "analyze.svg"),
        ("train = 4\n", "train"),
        ("[train\n", "line 1"),
    ],
)
def test_errors_name_the_field(text, fragment):
    with pytest.raises(ConfigParseError) as info:
        parse_config(text, "cfg.toml")
    assert fragment in str(info.value)
    assert "cfg.toml" in str(info.value)


def test_invalid_values_rejected(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("[splits]\nval = 0\n")
    with pytest.raises(ConfigParseError):
        load_config(path)
    path.write_text("[phantom]\norgan_jitter = 0.5\n")
    with pytest.raises(ConfigParseError):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigParseError):
        load_config(tmp_path / "nope.toml")


def test_shipped_config_matches_defaults():
    from pathlib import Path

    cfg = load_config(Path(__file__).parent.parent / "configs" / "desk.toml")
    assert cfg.splits.total == 30
    cfg.analyze.svg = False
    assert cfg == load_config()
