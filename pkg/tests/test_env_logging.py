from __future__ import annotations

import logging
import os
from pathlib import Path

import pytest

from polishsense.constants import LOG_LEVEL_ENV, THREADS_ENV
from polishsense.env_utils import load_environment, resolve_log_level, resolve_thread_count
from polishsense.errors import ConfigError
from polishsense.file_utils import atomic_write_text, read_json, write_json
from polishsense.logging_utils import attach_log_file, detach_log_file, get_logger, log_section


class TestEnvironment:
    def test_thread_count_default(self):
        assert resolve_thread_count({}) == 1

    def test_thread_count_from_env(self):
        assert resolve_thread_count({THREADS_ENV: " 4 "}) == 4

    @pytest.mark.parametrize("raw", ["0", "-2", "many"])
    def test_thread_count_rejects_bad_values(self, raw):
        with pytest.raises(ConfigError, match=THREADS_ENV):
            resolve_thread_count({THREADS_ENV: raw})

    def test_log_level(self):
        assert resolve_log_level({}) == logging.INFO
        assert resolve_log_level({LOG_LEVEL_ENV: "debug"}) == logging.DEBUG
        with pytest.raises(ConfigError):
            resolve_log_level({LOG_LEVEL_ENV: "chatty"})

    def test_env_file_does_not_override_process(self, tmp_path: Path, monkeypatch):
        env_file = tmp_path / ".env"
        env_file.write_text(f"{THREADS_ENV}=3\nPOLISHSENSE_TEST_ONLY=yes\n")
        monkeypatch.setenv(THREADS_ENV, "2")
        monkeypatch.delenv("POLISHSENSE_TEST_ONLY", raising=False)
        loaded = load_environment(env_file)
        assert loaded[THREADS_ENV] == "3"
        assert os.environ[THREADS_ENV] == "2"
        assert os.environ["POLISHSENSE_TEST_ONLY"] == "yes"
        monkeypatch.delenv("POLISHSENSE_TEST_ONLY")

    def test_missing_env_file(self, tmp_path: Path):
        assert load_environment(tmp_path / "absent.env") == {}


class TestLogging:
    def test_section_is_mirrored_to_file(self, tmp_path: Path, monkeypatch):
        monkeypatch.delenv(LOG_LEVEL_ENV, raising=False)
        log = get_logger("tests")
        path = tmp_path / "logs" / "polishsense.log"
        handler = attach_log_file(log, path)
        try:
            log_section(log, "Header line", "body line")
        finally:
            detach_log_file(log, handler)
        text = path.read_text()
        assert "INFO Header line" in text
        assert "body line" in text
        assert handler not in log.handlers

    def test_single_stream_handler(self):
        first = get_logger("tests.once")
        second = get_logger("tests.once")
        assert first is second
        assert len(second.handlers) == 1


class TestFiles:
    def test_atomic_write_leaves_no_temp_file(self, tmp_path: Path):
        path = tmp_path / "nested" / "out.txt"
        atomic_write_text(path, "hello\n")
        assert path.read_text() == "hello\n"
        assert not (tmp_path / "nested" / "out.txt.tmp").exists()

    def test_json_is_sorted_and_stable(self, tmp_path: Path):
        path = tmp_path / "doc.json"
        write_json(path, {"b": 1, "a": [0.1, 2]})
        assert path.read_text().index('"a"') < path.read_text().index('"b"')
        assert read_json(path) == {"a": [0.1, 2], "b": 1}
