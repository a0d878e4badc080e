import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from uralab.config import SystemConfig
from uralab.harness import (CSV_COLUMNS, SweepRow, TrialMetrics, aggregate, compute_nmse,
                            compute_pmd_pfa, nmse_db, point_config, run_sweep, run_trial,
                            trial_rng, write_csv)

TINY = SystemConfig(B=32, Bp=6, Bc=26, Lp=32, L=200, M=4, Ka=2, ebn0_db=12.0)


def test_pmd_pfa_examples():
    a, b, c = (0, 1), (1, 0), (1, 1)
    assert compute_pmd_pfa({a, b}, {a, b}) == (0.0, 0.0)
    assert compute_pmd_pfa({a, b}, set()) == (1.0, 0.0)
    assert compute_pmd_pfa({a, b}, {a, c}) == (0.5, 0.5)


@given(st.sets(st.integers(0, 20), min_size=1), st.sets(st.integers(0, 20)))
def test_pmd_pfa_counts(truth, decoded):
    p_md, p_fa = compute_pmd_pfa(truth, decoded)
    assert 0 <= p_md <= 1 and 0 <= p_fa <= 1
    assert p_md * len(truth) == pytest.approx(len(truth - decoded))
    if decoded:
        assert p_fa * len(decoded) == pytest.approx(len(decoded - truth))


def test_nmse_examples(rng):
    h = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    assoc = {0: 0, 1: 1, 2: 2}
    assert compute_nmse(h, h, assoc) == -100.0
    assert compute_nmse(h, np.zeros_like(h), assoc) == pytest.approx(0.0)
    e = rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)
    e *= np.sqrt(0.01 * np.sum(np.abs(h) ** 2) / np.sum(np.abs(e) ** 2))
    assert compute_nmse(h, h + e, assoc) == pytest.approx(-20.0)


def test_nmse_unassociated_rows_count_as_zero_estimate(rng):
    h = rng.standard_normal((2, 3)) + 0j
    est = np.stack([h[1]])
    expect = 10 * np.log10(np.sum(np.abs(h[0]) ** 2) / np.sum(np.abs(h) ** 2))
    assert compute_nmse(h, est, {1: 0}) == pytest.approx(expect)
    assert nmse_db(0.0, 1.0) == -100.0


def test_trial_streams_are_independent_and_reproducible():
    a = trial_rng(5, 3).standard_normal(4)
    np.testing.assert_array_equal(a, trial_rng(5, 3).standard_normal(4))
    assert not np.allclose(a, trial_rng(5, 4).standard_normal(4))
    assert not np.allclose(a, trial_rng(6, 3).standard_normal(4))


def test_trial_is_deterministic_and_bounded():
    m1, m2 = run_trial(TINY, 7), run_trial(TINY, 7)
    assert m1 == m2
    assert 0 <= m1.p_md <= 1 and 0 <= m1.p_fa <= 1
    assert m1.channel_uses_total == TINY.L + m1.rounds * TINY.Lp


def test_aggregate_matches_hand_averages():
    recs = [TrialMetrics(0.5, 0.0, -10.0, 1, 2, 264, 0),
            TrialMetrics(0.0, 0.25, -20.0, 0, 1, 200, 1),
            TrialMetrics(0.25, 0.0, -12.0, 2, 3, 328, 2)]
    row = aggregate("ebn0_db", 6.0, recs, 11)
    assert row.p_md == pytest.approx(0.25)
    assert row.p_fa == pytest.approx(0.25 / 3)
    assert row.p_e == pytest.approx(0.25 + 0.25 / 3)
    assert row.nmse_db == -12.0
    assert row.avg_rounds == pytest.approx(1.0)
    assert row.avg_channel_uses == pytest.approx(264.0)
    assert row.trials == 3 and row.seed == 11


def test_sweep_rows_match_trials():
    rows = run_sweep(TINY, "ebn0_db", [10, 14], trials=2, master_seed=3)
    assert [r.value for r in rows] == [10.0, 14.0] or [r.value for r in rows] == [10, 14]
    for row, eb in zip(rows, (10, 14)):
        recs = [run_trial(TINY.replace(ebn0_db=eb), t, 3) for t in range(2)]
        assert row.p_md == pytest.approx(np.mean([r.p_md for r in recs]))


def test_sweep_reports_bad_point_and_continues():
    rows = run_sweep(TINY, "Ka", [0, 2], trials=1)
    assert rows[0].error and rows[0].trials == 0
    assert rows[1].error is None and rows[1].trials == 1


def test_point_config_axes():
    assert point_config(TINY, "Rc", 0.16).L == 200
    assert point_config(TINY, "M", "8").M == 8
    with pytest.raises(Exception):
        point_config(TINY, "B", 3)


def test_csv_is_byte_identical_across_runs(tmp_path):
    texts = []
    for name in ("a.csv", "b.csv"):
        rows = run_sweep(TINY, "ebn0_db", [12], trials=1, master_seed=1)
        texts.append(write_csv(rows, tmp_path / name))
    assert texts[0] == texts[1]
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    header = next(csv.reader(io.StringIO(texts[0])))
    assert tuple(header) == CSV_COLUMNS


def test_csv_blank_for_missing_values():
    text = write_csv([SweepRow("Ka", 0, 0, seed=1, error="bad")])
    line = text.splitlines()[1].split(",")
    assert line[:3] == ["Ka", "0", "0"] and line[3] == ""
