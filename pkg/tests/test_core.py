import numpy as np
import pytest

from linkcount.core import (
    BlockageSequence,
    ConfigError,
    FileFormatError,
    LabeledSample,
    RssTrace,
    SystemConfig,
    load_crossing_log,
    load_sequences,
    save_crossing_log,
    save_sequences,
    split_into_windows,
    timestamps_to_sequence,
)


def naive_slot_scan(crossing_times, w, slot):
    """Independent oracle: test each slot against every crossing time."""
    bits = []
    for i in range(w):
        lo, hi = i * slot, (i + 1) * slot
        bits.append(1 if any(lo <= t < hi for t in crossing_times) else 0)
    return bits


class TestTimestampsToSequence:
    def test_empty_input_gives_all_zeros(self):
        seq = timestamps_to_sequence([], 300, 1.0)
        assert seq.w == 300
        assert seq.popcount == 0

    def test_slot_arithmetic_and_collapse(self):
        seq = timestamps_to_sequence([1.2, 1.8, 7.0], 10, 1.0)
        assert list(np.nonzero(seq.bits)[0]) == [1, 7]

    def test_out_of_range_names_timestamp(self):
        with pytest.raises(ValueError, match="301.5"):
            timestamps_to_sequence([2.0, 301.5], 300, 1.0)
        with pytest.raises(ValueError, match="-0.1"):
            timestamps_to_sequence([-0.1], 300, 1.0)

    def test_matches_naive_slot_scan(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            w = int(rng.integers(1, 40))
            slot = float(rng.choice([0.5, 1.0, 2.0]))
            times = sorted(rng.uniform(0, w * slot, size=rng.integers(0, 25)))
            seq = timestamps_to_sequence(times, w, slot)
            assert list(seq.bits) == naive_slot_scan(times, w, slot)

    def test_idempotent_under_duplicate_crossing(self):
        times = [3.3, 8.1, 44.4]
        base = timestamps_to_sequence(times, 60, 1.0)
        dup = timestamps_to_sequence(times + [8.1], 60, 1.0)
        assert base == dup

    def test_length_is_exactly_w_regardless_of_sparsity(self):
        for times in ([], [0.0], [0.1 * k for k in range(100)]):
            assert timestamps_to_sequence(times, 17, 0.1).w == 17


class TestSplitIntoWindows:
    def test_hundred_minutes_gives_twenty_windows(self):
        rng = np.random.default_rng(3)
        times = sorted(rng.uniform(0, 6000, size=400))
        windows = split_into_windows(times, 6000.0, 5.0, 1.0)
        assert len(windows) == 20
        assert all(w.w == 300 for w in windows)

    def test_concatenation_matches_full_log_slotting(self):
        rng = np.random.default_rng(11)
        times = sorted(rng.uniform(0, 6000, size=500))
        windows = split_into_windows(times, 6000.0, 5.0, 1.0)
        concatenated = np.concatenate([w.bits for w in windows])
        assert list(concatenated) == naive_slot_scan(times, 6000, 1.0)
        # popcount equals crossings minus same-slot collisions
        slots = {int(t // 1.0) for t in times}
        assert int(concatenated.sum()) == len(slots)

    def test_empty_log(self):
        windows = split_into_windows([], 600.0, 5.0, 1.0)
        assert len(windows) == 2
        assert all(w.popcount == 0 for w in windows)

    def test_rebasing(self):
        windows = split_into_windows([330.0], 600.0, 5.0, 1.0)
        assert windows[0].popcount == 0
        assert list(np.nonzero(windows[1].bits)[0]) == [30]

    def test_too_short_log_is_an_error(self):
        with pytest.raises(ValueError, match="shorter than one"):
            split_into_windows([], 200.0, 5.0, 1.0)

    def test_trailing_remainder_discarded_with_warning(self):
        with pytest.warns(UserWarning, match="discarding trailing"):
            windows = split_into_windows([610.0], 700.0, 5.0, 1.0)
        assert len(windows) == 2
        assert all(w.popcount == 0 for w in windows)


class TestBlockageSequence:
    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            BlockageSequence(np.array([0, 1, 2]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            BlockageSequence(np.array([], dtype=np.uint8))

    def test_bits_are_immutable(self):
        seq = timestamps_to_sequence([1.0], 4, 1.0)
        with pytest.raises(ValueError):
            seq.bits[0] = 1

    def test_bitstring_round_trip(self):
        seq = timestamps_to_sequence([0.5, 2.5], 5, 1.0)
        assert BlockageSequence.from_bitstring(seq.to_bitstring()) == seq
        with pytest.raises(ValueError):
            BlockageSequence.from_bitstring("01x")


class TestRssTrace:
    def test_rejects_non_increasing_times(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            RssTrace(np.array([0.0, 1.0, 1.0]), np.array([-40.0] * 3), 5.0)

    def test_rejects_times_outside_window(self):
        with pytest.raises(ValueError, match="window_length"):
            RssTrace(np.array([0.0, 5.0]), np.array([-40.0, -40.0]), 5.0)

    def test_shifted(self):
        trace = RssTrace(np.array([0.0, 1.0]), np.array([-40.0, -42.0]), 2.0)
        assert list(trace.shifted(3.0).rss) == [-37.0, -39.0]


class TestLabeledSample:
    def test_collected_only_for_low_classes(self):
        seq = timestamps_to_sequence([], 4, 1.0)
        LabeledSample(seq, 1, "collected")
        with pytest.raises(ValueError, match="collected"):
            LabeledSample(seq, 2, "collected")

    def test_unknown_origin(self):
        seq = timestamps_to_sequence([], 4, 1.0)
        with pytest.raises(ValueError, match="origin"):
            LabeledSample(seq, 0, "synthetic")


class TestSystemConfig:
    def test_defaults_match_documented_values(self):
        config = SystemConfig()
        assert config.tau == 5.0
        assert config.window_minutes == 5.0
        assert config.lstm_hidden == 100
        assert config.epochs == 120
        assert config.batch_size == 15
        assert config.learning_rate == 0.01
        assert config.momentum == 0.9
        assert config.w == 300

    def test_testbed_presets(self):
        second = SystemConfig.testbed2()
        assert (second.tau, second.epochs, second.batch_size) == (5.5, 150, 3)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"tau": 10.5},
            {"tau": -1.0},
            {"window_minutes": 0.5},
            {"window_minutes": 6.0},
            {"lstm_hidden": 5},
            {"lstm_hidden": 101},
            {"epochs": 5},
            {"epochs": 200},
            {"batch_size": 0},
            {"batch_size": 31},
            {"momentum": 1.0},
            {"detector_mode": "bogus"},
        ],
    )
    def test_out_of_range_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            SystemConfig(**kwargs)

    def test_non_integer_slot_count_rejected(self):
        with pytest.raises(ConfigError, match="integer"):
            SystemConfig(window_minutes=1.0, slot_duration=0.7)


class TestFileFormats:
    def test_crossing_log_round_trip(self, tmp_path):
        path = tmp_path / "log.txt"
        times = [0.25, 17.125, 599.5]
        save_crossing_log(path, times, 600.0)
        loaded, duration = load_crossing_log(path)
        assert loaded == times
        assert duration == 600.0

    def test_crossing_log_requires_header(self, tmp_path):
        path = tmp_path / "log.txt"
        path.write_text("1.5\n2.5\n")
        with pytest.raises(FileFormatError, match="duration_s"):
            load_crossing_log(path)

    def test_crossing_log_rejects_garbage_line(self, tmp_path):
        path = tmp_path / "log.txt"
        path.write_text("# duration_s=10.0\n1.5\nnot-a-number\n")
        with pytest.raises(FileFormatError, match="log.txt:3"):
            load_crossing_log(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileFormatError, match="cannot read"):
            load_crossing_log(tmp_path / "absent.txt")

    def test_sequence_file_round_trip(self, tmp_path):
        path = tmp_path / "seqs.txt"
        rows = [
            (0, timestamps_to_sequence([], 6, 1.0)),
            (3, timestamps_to_sequence([0.5, 4.2], 6, 1.0)),
        ]
        save_sequences(path, rows)
        assert load_sequences(path) == rows

    def test_sequence_file_rejects_bad_row(self, tmp_path):
        path = tmp_path / "seqs.txt"
        path.write_text("0,0101\n2,01x1\n")
        with pytest.raises(FileFormatError, match="seqs.txt:2"):
            load_sequences(path)
