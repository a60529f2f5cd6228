import warnings

import numpy as np
import pytest

from metametrics.dsl import parse_definitions
from metametrics.errors import InvalidInput, UnknownStat
from metametrics.gamelog import aggregate, read_game_log, write_game_log
from metametrics.tensor import (
    MetricTensor, aggregate_and_evaluate, apply_exposure_filter, parse_player_filter,
)

from conftest import make_log

STATS = ["PTS", "MIN", "FG", "FGA"]


def small_log():
    rows = [
        ("2001", "a", "T1", "g1", {"PTS": 10, "MIN": 30, "FG": 20, "FGA": 50}),
        ("2001", "a", "T1", "g2", {"PTS": 20, "MIN": 30, "FG": 20, "FGA": 50}),
        ("2001", "b", "T1", "g1", {"PTS": 5, "MIN": 20, "FG": 2, "FGA": 0}),
        ("2002", "b", "T2", "g1", {"PTS": 7, "MIN": 25, "FG": 3, "FGA": 6}),
    ]
    return make_log(rows, STATS)


DEFS = parse_definitions(
    "PTS36 total = 36 * PTS / MIN\n"
    "FG% percentage attempts=FGA = FG / FGA\n"
)


def test_aggregate_and_evaluate_examples():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        X = aggregate_and_evaluate(small_log(), DEFS)
    assert X.seasons == ["2001", "2002"] and X.players == ["a", "b"]
    s, p = 0, 0
    assert X.values[s, p, 0] == 18.0
    assert X.values[s, p, 1] == pytest.approx(0.40)
    assert X.attempts[s, p, 1] == 100
    # player a absent in 2002
    assert np.all(np.isnan(X.values[1, 0]))
    assert not X.mask[1, 0].any()
    # zero attempts -> missing entry plus warning
    assert np.isnan(X.values[0, 1, 1])
    assert any("FG%" in w for w in X.warnings)
    assert X.exposure[0, 0] == 60


def test_division_by_zero_warns_but_does_not_abort():
    with pytest.warns(RuntimeWarning):
        aggregate_and_evaluate(small_log(), DEFS)


def test_missing_counting_stat_is_zero_but_missing_attempts_is_not():
    rows = [
        ("2001", "a", "T1", "g1", {"PTS": 10, "MIN": 30, "FG": 4, "FGA": 10}),
        ("2001", "a", "T1", "g2", {"PTS": 10, "MIN": 30, "FG": 4}),
        ("2001", "b", "T1", "g1", {"MIN": 30, "FG": 1, "FGA": 2}),
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        X = aggregate_and_evaluate(make_log(rows, STATS), DEFS)
    assert X.values[0, 1, 0] == 0.0
    assert np.isnan(X.values[0, 0, 1])
    assert X.values[0, 0, 0] == 12.0


def test_integer_sums_are_exact():
    rng = np.random.default_rng(3)
    rows = [("1", "p", "T", f"g{i}", {"PTS": int(v), "MIN": 1}) for i, v in enumerate(rng.integers(0, 10**9, 500))]
    log = make_log(rows, ["PTS", "MIN"])
    agg = aggregate(log)
    assert agg.column("PTS")[0] == sum(int(r[4]["PTS"]) for r in rows)


def test_trades_pool_into_one_row():
    rows = [
        ("1", "a", "T1", "g1", {"PTS": 10, "MIN": 36}),
        ("1", "a", "T2", "g1", {"PTS": 20, "MIN": 36}),
    ]
    X = aggregate_and_evaluate(make_log(rows, ["PTS", "MIN"]), parse_definitions("P36 = 36 * PTS / MIN"))
    assert X.values.shape == (1, 1, 1)
    assert X.values[0, 0, 0] == 15.0


def test_unknown_stat_and_bad_input():
    with pytest.raises(UnknownStat):
        aggregate_and_evaluate(small_log(), parse_definitions("A = AST"))
    with pytest.raises(InvalidInput):
        make_log([("1", "a", "T", "g", {"PTS": -1})], ["PTS"])
    with pytest.raises(InvalidInput):
        make_log([("1", "a", "T", "g", {"PTS": 1}), ("1", "a", "T", "g", {"PTS": 2})], ["PTS"])


def test_deterministic_and_json_round_trip(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = aggregate_and_evaluate(small_log(), DEFS)
        b = aggregate_and_evaluate(small_log(), DEFS)
    assert a.values.tobytes() == b.values.tobytes()
    a.save(tmp_path / "t.json")
    c = MetricTensor.load(tmp_path / "t.json")
    assert a.equals(c)
    assert np.array_equal(a.mask, c.mask)
    assert "null" in (tmp_path / "t.json").read_text()


def test_csv_round_trip(tmp_path, data_dir):
    log = read_game_log(data_dir / "league50_logs.csv")
    write_game_log(log, tmp_path / "l.csv")
    again = read_game_log(tmp_path / "l.csv")
    assert np.array_equal(log.stats, again.stats)
    assert log.players == again.players and log.seasons == again.seasons


def test_exposure_filter():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        X = aggregate_and_evaluate(small_log(), DEFS)
    F = apply_exposure_filter(X, rate_min=50, total_min=0)
    # FG% is a percentage -> rate threshold applies
    assert np.isnan(F.values[1, 1, 1]) and not np.isnan(X.values[1, 1, 1])
    assert F.values[1, 1, 0] == X.values[1, 1, 0]
    assert F.values[0, 0, 1] == X.values[0, 0, 1]


def test_player_filters(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        X = aggregate_and_evaluate(small_log(), DEFS)
    assert parse_player_filter("all", X) == ["a", "b"]
    assert parse_player_filter("ids:b", X) == ["b"]
    assert parse_player_filter("min_seasons:2", X) == ["b"]
    f = tmp_path / "ids.txt"
    f.write_text("# keep\na\n")
    assert parse_player_filter(f"file:{f}", X) == ["a"]
    with pytest.raises(InvalidInput):
        parse_player_filter("team:T1", X)
