"""
Django settings for kinetic_workbench project.

The workbench has no web surface: Django provides the settings layer, the
app registry, management commands and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import math
import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / ".env")


# No sessions or signing; the key only satisfies Django.
SECRET_KEY = "kinetic-workbench-local-only"

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'tensorcore',
    'clusters',
    'dynamics',
    'hierarchy',
    'meanfield',
    'continuum',
    'scenarios',
]

MIDDLEWARE = []


# Database
# No persistence: every run writes its JSON/CSV/PDF artifacts to OUTPUT_DIR.

DATABASES = {}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# ---------------------------------------------------------
# Workbench numerics
# ---------------------------------------------------------

WORKBENCH = {
    "HERMITIAN_TOLERANCE": 1e-10,
    "DEFAULT_N_MAX": 2,
    "MAX_N_MAX": 3,
    "PROBE_COUNT": 8,
    "QUADRATURE_NODES": 8,
    "TAIL_RATIO_CLAMP": 0.9,
    "RK_STEP_BUDGET": 1e-10,
    "DEFECT_TOLERANCE": 1e-8,
    "ROUNDOFF_FLOOR": 1e-12,
    "MAX_DENSE_SIDE": 4096,
    "MAX_KERNEL_POINTS": 32,
    "OUTPUT_DIR": BASE_DIR / "reports",
    # the only setting taken from the environment
    "THREADS": max(1, int(os.environ.get("WORKBENCH_THREADS", "1"))),
}

# Sufficient convergence radii of the solution series. Breaching them only warns.
CONVERGENCE_RADII = {
    "bbgky": math.exp(-1),
    "collision": math.exp(-8),
    "kinetic": math.exp(-10) / (1 + math.exp(-9)),
}


# ---------------------------------------------------------
# Logging
# ---------------------------------------------------------

LOG_LEVEL = "INFO"

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "loggers": {
        app: {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False}
        for app in INSTALLED_APPS
    },
}


# ---------------------------------------------------------
# Property-based tests
# ---------------------------------------------------------

try:
    from hypothesis import settings as hypothesis_settings

    hypothesis_settings.register_profile("workbench", max_examples=15, deadline=None)
    hypothesis_settings.load_profile("workbench")
except ImportError:  # hypothesis is a test-only dependency
    pass
