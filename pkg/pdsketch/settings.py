"""
Django settings for the PDSketch toolkit.

This module defines global configuration for the project, including:

- Installed apps (the toolkit runs entirely through management commands)
- Database configuration (SQLite by default, used for run manifests and
  benchmark records)
- Logging
- The `PDSKETCH` dictionary holding every tunable default of the toolkit
  (seeds, slot architectures, training, discretization, search, grid world)

The file reads optional overrides from `local_settings.py` when present.

================================================================================
SETUP INSTRUCTIONS - DATABASE CONFIGURATION
================================================================================

The database only stores run manifests and benchmark rows. To create it:
    python manage.py migrate

TO MODIFY DATABASE SETTINGS:
    1. Set the PDSKETCH_DB environment variable to another SQLite path, or
    2. Create a local_settings.py file in this directory with:
       DATABASES = {
           'default': {
               'ENGINE': 'django.db.backends.sqlite3',
               'NAME': '/path/to/runs.sqlite3',
           }
       }

TO TUNE THE TOOLKIT:
    Override individual sections of PDSKETCH in local_settings.py, e.g.
       PDSKETCH = {**PDSKETCH, "TRAIN": {**PDSKETCH["TRAIN"], "epochs": 40}}
    Command-line flags always win over settings.
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: the toolkit never serves requests; the key only satisfies
# Django's startup checks.
SECRET_KEY = os.environ.get("PDSKETCH_SECRET_KEY", "pdsketch-local-only-not-a-secret")

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'pdsketch_app',
]

MIDDLEWARE = []


# Database
# https://docs.djangoproject.com/en/5.0/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get("PDSKETCH_DB", str(BASE_DIR / "pdsketch_runs.sqlite3")),
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Default primary key field type

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# ------------------------------------------------------------------------------
# LOGGING
# ------------------------------------------------------------------------------

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "pdsketch_app": {
            "handlers": ["console"],
            "level": os.environ.get("PDSKETCH_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}


# ------------------------------------------------------------------------------
# TOOLKIT DEFAULTS
# ------------------------------------------------------------------------------

PDSKETCH = {
    # All randomness flows from explicit seeds; 0 everywhere by default.
    "SEED": 0,

    # Neural slot architecture (2 hidden layers of width 64, ReLU).
    "ARCH": {
        "hidden": [64, 64],
        "nonlinearity": "relu",
        "encoder": "identity",
    },

    "TRAIN": {
        "lr": 1e-3,
        "batch_size": 32,
        "epochs": 10,
        "lambda_goal": 1.0,
        "lambda_trans": 1.0,
        "lambda_look": 1.0,
        "clip_norm": 10.0,
        "optimizer": "adam",
        "holdout": 0.1,
    },

    "DISCRETIZE": {
        "bins": 128,
        "max_iter": 100,
        "finetune": False,
        "finetune_lr": 0.05,
        "max_states": 400,
    },

    "FOIL": {
        "min_precision": 0.95,
        "max_clause_length": 6,
    },

    "SEARCH": {
        "max_nodes": 20000,
        "max_seconds": 120.0,
        "weight": 1.0,
        "round_decimals": 4,
    },

    "GRID": {
        "size": 7,
        "n_doors": 4,
        "n_objects": 4,
    },

    # Persist run manifests and bench rows in the database as well as on disk.
    "RECORD_RUNS": True,
}


# Local override
try:
    from .local_settings import *  # noqa: F401,F403
except ImportError:
    pass
