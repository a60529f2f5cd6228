from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from metametrics.gamelog import GameLog

DATA = Path(__file__).parent / "data"


def make_log(rows, stats):
    """Build a GameLog from ``(season, player, team, game, {stat: value})`` tuples."""
    records = []
    for season, player, team, game, values in rows:
        rec = {"season": season, "player_id": player, "player_name": "", "team": team, "game_id": game}
        rec.update({s: values.get(s, np.nan) for s in stats})
        records.append(rec)
    return GameLog.from_frame(pd.DataFrame(records))


def random_corr(rng, M, scale=1.0):
    A = rng.normal(size=(M, M + 2)) * scale
    S = A @ A.T + 1e-3 * np.eye(M)
    d = np.sqrt(np.diag(S))
    C = S / np.outer(d, d)
    np.fill_diagonal(C, 1.0)
    return C


@pytest.fixture
def data_dir():
    return DATA


ACCEPTANCE = []


def record_acceptance(label, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
