import json
import pathlib

import pytest

import mcsql

DESK = pathlib.Path(__file__).resolve().parents[2] / "fixtures" / "desk"
DB = DESK / "database" / "toxicology" / "toxicology.sqlite"


def test_version():
    assert mcsql.__version__.count(".") == 2


def test_execute_fingerprints_ignore_row_order():
    a = mcsql.execute(DB, "SELECT atom_id FROM atom ORDER BY atom_id")
    b = mcsql.execute(DB, "SELECT atom_id FROM atom ORDER BY atom_id DESC")
    assert a["status"] == "ok"
    assert a["row_count"] == b["row_count"] > 0
    assert a["fingerprint"] == b["fingerprint"]
    bad = mcsql.execute(DB, "SELECT nope FROM atom")
    assert bad["status"] == "syntax_error"
    assert bad["fingerprint"] is None


def test_config_validation():
    cfg = mcsql.resolved_config(DESK / "config.json", {"p_q": 3})
    assert cfg["p_q"] == 3
    with pytest.raises(mcsql.ConfigError):
        mcsql.resolved_config(DESK / "config.json", {"T": 1.5})


def test_replayed_run_matches_expected(tmp_path):
    expected = json.loads((DESK / "expected.json").read_text())
    out = mcsql.run(DESK / "config.json", tmp_path / "run", {"cache_dir": str(tmp_path / "cache")})
    assert out["exit_code"] == 0
    assert out["fixture_misses"] == 0
    assert out["report"]["ex_overall"] == pytest.approx(expected["ex_overall"])
    assert out["report"]["matches"] == expected["matches"]
    assert (tmp_path / "run" / "predictions.json").exists()


def test_cache_stats():
    stats = mcsql.cache_stats(DESK / "replay")
    assert stats["total"] == 251
    assert stats["corrupt"] == []
