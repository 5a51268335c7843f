import pytest

from core.database import ResultStore


@pytest.fixture
def store(tmp_path):
    return ResultStore(tmp_path / "results.db")


def record(method, ratio, index=1):
    return {
        "n": 3, "seed": 42, "method": method, "ratio": ratio, "ratio_clamped": False,
        "index": index, "iterations": 12, "wall_ms": 3.5, "trace_ref": f"n3-0-{method}",
    }


def test_campaign_round_trip(store):
    campaign_id = store.add_campaign(7, {"sizes": [3], "methods": ["uqmaxcut"]})
    store.add_records(campaign_id, [record("uqmaxcut", 1.0), record("qaoa_simplex", 0.8, index=0)])

    rows = store.get_records(campaign_id)
    assert [r["method"] for r in rows] == ["uqmaxcut", "qaoa_simplex"]
    assert rows[1]["ratio"] == 0.8
    assert rows[1]["idx"] == 0

    campaigns = store.list_campaigns()
    assert campaigns[0]["master_seed"] == 7
    assert campaigns[0]["manifest"]["sizes"] == [3]


def test_trace_rows(store):
    store.add_trace("n3-0-uqmaxcut", [(0, 0.5, 0.2, 1.2), (1, -0.1, None, 0.0)])
    trace = store.get_trace("n3-0-uqmaxcut")
    assert [row["k"] for row in trace] == [0, 1]
    assert trace[1]["grad_norm"] is None


def test_settings(store):
    assert store.get_setting("last_campaign") is None
    assert store.get_setting("last_campaign", "none") == "none"
    store.set_setting("last_campaign", "4")
    assert store.get_setting("last_campaign") == "4"


def test_default_location(tmp_path, monkeypatch):
    from core import config

    monkeypatch.setenv("UQISING_HOME", str(tmp_path / "home"))
    config.get_settings.cache_clear()
    try:
        store = ResultStore()
        assert store.db_path == str(tmp_path / "home" / "results.db")
    finally:
        config.get_settings.cache_clear()
