import pytest

from wavepad.config import (ConfigFileError, format_config, load_config, model_config_from,
                            parse_kv, split_settings)
from wavepad.model import ModelConfig, SkipMode
from wavepad.train import TrainConfig
from wavepad.wavelet import FeatureMode


def test_load_full_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# desk run\nblock_convs = 2,2,2,2,2\nchannels=8,8,8,8,8  # narrow\n"
                    "skip_mode = double\nreference_arch = no\n\nepochs = 3\nimage_size = 32x32\n"
                    "feature_mode = approx\nearly_stop_accuracy = none\nsplit = 0.6,0.2,0.2\n")
    model_kw, cfg = load_config(path)
    assert model_kw == {"block_convs": (2,) * 5, "channels": (8,) * 5,
                        "skip_mode": SkipMode.DOUBLE, "reference_arch": False}
    assert cfg.epochs == 3 and cfg.image_size == (32, 32)
    assert cfg.feature_mode is FeatureMode.APPROX and cfg.early_stop_accuracy is None
    assert cfg.split == (0.6, 0.2, 0.2)


@pytest.mark.parametrize("text,match", [
    ("epochs 3", "key = value"),
    ("epochs = 3\nepochs = 4", "duplicate"),
    ("epoch = 3", "unknown"),
    ("epochs = three", "bad value"),
    ("stem = maybe", "bad value"),
    ("batch_size = 1", "batch_size"),
    (" = 3", "empty key"),
])
def test_errors(tmp_path, text, match):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigFileError, match=match):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigFileError):
        load_config(tmp_path / "absent.cfg")


def test_format_round_trip():
    model = ModelConfig(skip_mode="double", input_shape=(1, 64, 64))
    train = TrainConfig(epochs=7, early_stop_accuracy=0.99, feature_mode="raw")
    lines = format_config(model, train)
    model_kw, train_kw = split_settings(parse_kv("\n".join(lines)))
    assert ModelConfig(**model_kw) == model
    assert TrainConfig(**train_kw) == train


def test_prefixed_keys():
    lines = format_config(ModelConfig(), TrainConfig(), prefix=True)
    assert "model.channels = 16,16,32,32,32" in lines
    assert "train.learning_rate = 0.002" in lines


def test_model_config_from_wraps_errors():
    with pytest.raises(ConfigFileError):
        model_config_from({"channels": (1, 2)})
    with pytest.raises(ConfigFileError):
        model_config_from({"no_such_key": 1})
