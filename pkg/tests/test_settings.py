from __future__ import annotations

import logging
import os
import unittest
from unittest import mock

from snan.settings import RuntimeSettings, configure_logging, settings_from_env


class TestSettingsFromEnv(unittest.TestCase):
    def test_defaults(self):
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(settings_from_env(), RuntimeSettings(threads=1, log_level="WARNING"))

    def test_threads(self):
        with mock.patch.dict(os.environ, {"SNAN_THREADS": "4"}, clear=True):
            self.assertEqual(settings_from_env().threads, 4)
        with mock.patch.dict(os.environ, {"SNAN_THREADS": "zero"}, clear=True):
            self.assertEqual(settings_from_env().threads, 1)
        with mock.patch.dict(os.environ, {"SNAN_THREADS": "-2"}, clear=True):
            self.assertEqual(settings_from_env().threads, 1)

    def test_log_level(self):
        with mock.patch.dict(os.environ, {"SNAN_LOG_LEVEL": "info"}, clear=True):
            self.assertEqual(settings_from_env().log_level, "INFO")
        with mock.patch.dict(os.environ, {"SNAN_LOG_LEVEL": "loud"}, clear=True):
            self.assertEqual(settings_from_env().log_level, "WARNING")
        with mock.patch.dict(os.environ, {"SNAN_DEBUG": "1", "SNAN_LOG_LEVEL": "ERROR"}, clear=True):
            self.assertEqual(settings_from_env().log_level, "DEBUG")


class TestConfigureLogging(unittest.TestCase):
    def test_single_handler(self):
        root = logging.getLogger("snan")
        before = list(root.handlers)
        level = root.level
        try:
            configure_logging(RuntimeSettings(log_level="INFO"))
            configure_logging(RuntimeSettings(log_level="DEBUG"))
            added = [h for h in root.handlers if getattr(h, "_snan_handler", False)]
            self.assertEqual(len(added), 1)
            self.assertEqual(root.level, logging.DEBUG)
        finally:
            root.handlers = before
            root.setLevel(level)


if __name__ == "__main__":
    unittest.main()
