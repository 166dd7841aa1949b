"""Pytest wiring: configure Django the way `manage.py test` does."""

import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "pdsketch.settings")
django.setup()

from django.test.utils import setup_databases, setup_test_environment, teardown_databases, teardown_test_environment  # noqa: E402

_old_config = None


def pytest_sessionstart(session):
    global _old_config
    setup_test_environment()
    _old_config = setup_databases(verbosity=0, interactive=False)


def pytest_sessionfinish(session, exitstatus):
    if _old_config is not None:
        teardown_databases(_old_config, verbosity=0)
    teardown_test_environment()
