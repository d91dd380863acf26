import numpy as np
import pytest

from scramwatch.attack import (
    ATTACK_ORDER,
    AttackSpec,
    build_scenario,
    inject,
    read_truth_csv,
    record,
    write_truth_csv,
)
from scramwatch.errors import ConfigError, DataError
from scramwatch.signals import CONTINUOUS_SIGNALS, STATE_SIGNALS

from conftest import make_series


def test_record_copies_exact_window():
    s = make_series(100, seed=1)
    seg = record(s, ["neutron_counts"], t_start=30, period=10)
    np.testing.assert_array_equal(seg.values["neutron_counts"],
                                  s.values["neutron_counts"][30:40])
    # the capture is a snapshot, not a view
    s.values["neutron_counts"][30] = -1.0
    assert seg.values["neutron_counts"][0] != -1.0


def test_record_rejects_state_signals_and_duplicates():
    s = make_series(100)
    with pytest.raises(ConfigError, match="continuous"):
        record(s, [STATE_SIGNALS[0]], 0, 5)
    with pytest.raises(ConfigError, match="twice"):
        record(s, ["neutron_counts", "neutron_counts"], 0, 5)
    with pytest.raises(ConfigError):
        record(s, [], 0, 5)


def test_record_bounds():
    s = make_series(100, start_time=50)
    record(s, ["linear_power"], t_start=50, period=10)
    record(s, ["linear_power"], t_start=140, period=10)
    with pytest.raises(DataError):
        record(s, ["linear_power"], t_start=141, period=10)
    with pytest.raises(DataError):
        record(s, ["linear_power"], t_start=49, period=10)


def test_inject_tiles_segment_and_masks_exactly():
    s = make_series(200, seed=2)
    seg = record(s, ["neutron_counts", "linear_power"], t_start=20, period=15)
    falsified, truth = inject(s, AttackSpec(segment=seg, t_attack=100, repeats=3))

    assert falsified.values is not s.values
    for name in ("neutron_counts", "linear_power"):
        np.testing.assert_array_equal(
            falsified.values[name][100:145],
            np.tile(s.values[name][20:35], 3))
        # outside the attack interval the series is untouched
        np.testing.assert_array_equal(falsified.values[name][:100], s.values[name][:100])
        np.testing.assert_array_equal(falsified.values[name][145:], s.values[name][145:])
        assert truth.mask[name][100:145].all()
        assert truth.mask[name].sum() == 45
    # unrecorded signals and all state channels are untouched
    np.testing.assert_array_equal(falsified.values["neutron_flux"], s.values["neutron_flux"])
    for name in STATE_SIGNALS:
        assert (falsified.values[name] == s.values[name]).all()
    assert truth.falsified_signals() == ("neutron_counts", "linear_power")


def test_inject_does_not_fit():
    s = make_series(120)
    seg = record(s, ["neutron_counts"], 0, 30)
    with pytest.raises(DataError, match="outside series"):
        inject(s, AttackSpec(segment=seg, t_attack=100, repeats=2))


def test_replaying_a_constant_region_is_invisible():
    s = make_series(100)
    s.values["neutron_counts"][:] = 5.0
    seg = record(s, ["neutron_counts"], 10, 10)
    falsified, truth = inject(s, AttackSpec(segment=seg, t_attack=50, repeats=2))
    np.testing.assert_array_equal(falsified.values["neutron_counts"], s.values["neutron_counts"])
    # the mask still records the overwrite: truth is about intent, not effect
    assert truth.mask["neutron_counts"][50:70].all()


def test_scenario_levels_follow_attack_order():
    s = make_series(500, seed=3)
    for level in range(1, 7):
        _, truth = build_scenario(s, level, t_start=100, period=20, t_attack=300, repeats=5)
        assert set(truth.falsified_signals()) == set(ATTACK_ORDER[:level])
    with pytest.raises(ConfigError):
        build_scenario(s, 0)
    with pytest.raises(ConfigError):
        build_scenario(s, 7)


def test_scenario_level_four_targets_regulating_rod():
    s = make_series(500, seed=4)
    _, truth = build_scenario(s, 4, t_start=100)
    assert set(truth.falsified_signals()) == {
        "neutron_counts", "linear_power", "neutron_flux", "rr_position"}


def test_attack_span_and_any_falsified():
    s = make_series(500, seed=5)
    _, truth = build_scenario(s, 2, t_start=100, period=20, t_attack=300, repeats=5)
    assert truth.spec.span == (300, 400)
    flat = truth.any_falsified()
    assert flat[300:400].all()
    assert flat.sum() == 100
    assert truth.is_falsified("neutron_counts", 300)
    assert not truth.is_falsified("neutron_counts", 299)
    assert not truth.is_falsified("rr_position", 350)


def test_truth_csv_round_trip(tmp_path):
    s = make_series(150, seed=6)
    _, truth = inject(s, AttackSpec(
        segment=record(s, ["neutron_flux"], 10, 8), t_attack=50, repeats=4))
    path = tmp_path / "truth.csv"
    write_truth_csv(path, truth)
    back = read_truth_csv(path)
    assert back.length == truth.length
    for name in CONTINUOUS_SIGNALS:
        np.testing.assert_array_equal(back.mask[name], truth.mask[name])

    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,signal,falsified"
    assert len(lines) == 1 + 150 * len(CONTINUOUS_SIGNALS)
