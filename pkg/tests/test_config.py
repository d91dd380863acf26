import pytest

from scramwatch.config import RunConfig, parse_config, read_calibration, write_calibration
from scramwatch.errors import ConfigError


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_basic_file(tmp_path):
    cfg = parse_config(write(tmp_path, """
# benchmark shape
cycles = 10
scrams = 6          # small corpus
cycle_train = 6
cycle_val = 2
scram_train = 4
scram_val = 1
desk_scale = yes
metric = mse
patience = none
threshold = 0.12
"""))
    assert cfg.cycles == 10
    assert cfg.desk_scale is True
    assert cfg.metric == "mse"
    assert cfg.patience is None
    assert cfg.threshold == pytest.approx(0.12)
    # untouched keys keep their defaults
    assert cfg.learning_rate == pytest.approx(0.000352)


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown key 'windw'"):
        parse_config(write(tmp_path, "windw = 10\n"))


def test_duplicate_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(write(tmp_path, "window = 10\nwindow = 12\n"))


def test_bad_value_names_line(tmp_path):
    with pytest.raises(ConfigError, match=":1:"):
        parse_config(write(tmp_path, "epochs = many\n"))


def test_missing_equals_rejected(tmp_path):
    with pytest.raises(ConfigError, match="key = value"):
        parse_config(write(tmp_path, "just some words\n"))


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "absent.cfg")


def test_validation_catches_bad_split(tmp_path):
    with pytest.raises(ConfigError, match="split"):
        parse_config(write(tmp_path, "cycles = 5\ncycle_train = 4\ncycle_val = 3\n"))


def test_validation_catches_bad_metric():
    with pytest.raises(ConfigError, match="metric"):
        RunConfig(metric="rmse").validate()
    with pytest.raises(ConfigError, match="quantile"):
        RunConfig(calibration_quantile=0.0).validate()
    with pytest.raises(ConfigError, match="onset"):
        RunConfig(scram_onset=900, scram_duration=800).validate()


def test_override_beats_file_and_skips_none():
    cfg = RunConfig()
    out = cfg.override(epochs=3, threshold=None, metric="mse")
    assert out.epochs == 3
    assert out.metric == "mse"
    assert out.threshold is None  # untouched, not cleared
    assert cfg.epochs == RunConfig.epochs  # original is frozen


def test_override_validates():
    with pytest.raises(ConfigError):
        RunConfig().override(min_run=0)


def test_bundled_configs_parse():
    for name in ("configs/benchmark.cfg", "configs/full.cfg"):
        cfg = parse_config(name)
        assert cfg.window == 10


def test_calibration_round_trip(tmp_path):
    path = tmp_path / "calibration.cfg"
    write_calibration(path, 0.1234567890123456, 7.5e-4)
    threshold, tau = read_calibration(path)
    assert threshold == 0.1234567890123456  # repr keeps full precision
    assert tau == 7.5e-4


def test_calibration_requires_both_keys(tmp_path):
    path = tmp_path / "calibration.cfg"
    path.write_text("threshold = 0.1\n")
    with pytest.raises(ConfigError, match="tau_shap"):
        read_calibration(path)
