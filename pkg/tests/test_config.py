import logging
from pathlib import Path

from config import load_settings, ordered_map
from logging_config import get_logger, set_level


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("QWALLS_THREADS", "3")
    monkeypatch.setenv("QWALLS_LOG_LEVEL", " debug ")
    monkeypatch.setenv("QWALLS_OUTPUT_DIR", "runs")
    settings = load_settings()
    assert settings.threads == 3
    assert settings.log_level == "DEBUG"
    assert settings.output_dir == Path("runs")


def test_bad_thread_count_falls_back(monkeypatch):
    monkeypatch.setenv("QWALLS_THREADS", "many")
    assert load_settings().threads == 1
    monkeypatch.setenv("QWALLS_THREADS", "-4")
    assert load_settings().threads == 1


def test_ordered_map_keeps_order():
    items = list(range(20))
    assert ordered_map(lambda x: x * x, items, threads=4) == [x * x for x in items]
    assert ordered_map(lambda x: x + 1, items, threads=1) == [x + 1 for x in items]
    assert ordered_map(str, [], threads=4) == []


def test_module_loggers_share_a_namespace():
    logger = get_logger("spectral")
    assert logger.name == "qwalls.spectral"
    parent = logging.getLogger("qwalls")
    previous = parent.level
    try:
        set_level("info")
        assert logger.getEffectiveLevel() == logging.INFO
        set_level("nonsense")
        assert logger.getEffectiveLevel() == logging.WARNING
    finally:
        parent.setLevel(previous)
