import os

import environ
import sentry_sdk

# WARNING: You should not directly edit this file if you are configuring
# a run. Instead, it is recommended that you configure the project through
# environment variables. This project uses `Django-environ` to load
# environment variables and cast them accordingly to update settings.
#
# Everything a single run needs (problem, scheme, levels, seed, ...) lives in
# the run config document passed to the management commands. The settings
# below only hold machine-level defaults.

# ------

PROJECT_ROOT = os.path.normpath(os.path.join(os.path.dirname(__file__), ".."))

env = environ.Env()
# Read .env file into os.environ, if exists
environ.Env.read_env(env_file=os.path.join(PROJECT_ROOT, ".env"))

# --- Settings ---

DEBUG = env.bool("DEBUG", default=False)

# Nothing is served or signed; Django only insists on a non-empty key.
SECRET_KEY = env.str("SECRET_KEY", default="tamedlevy-local-runs-only")

ALLOWED_HOSTS: list = []

# Runs write CSV files, not database rows.
DATABASES: dict = {}

SENTRY_DSN = env.str("SENTRY_DSN", default="")
if SENTRY_DSN:
    sentry_sdk.init(
        dsn=SENTRY_DSN,
        # Long Monte Carlo runs are few; capture all of them.
        traces_sample_rate=env.float(
            "SENTRY_TRACES_SAMPLE_RATE", default=1.0
        ),
    )

TIME_ZONE = "UTC"
LANGUAGE_CODE = "en-us"
USE_I18N = True
USE_L10N = True
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.AutoField"

INSTALLED_APPS = [
    # Local apps
    "tamedlevy.core",
    "tamedlevy.problems",
    "tamedlevy.noise",
    "tamedlevy.taming",
    "tamedlevy.schemes",
    "tamedlevy.convergence",
    "tamedlevy.cli",
    # External apps
    "rest_framework",
]

# --- Run defaults ---

# 0 means one worker per CPU.
TAMEDLEVY_WORKERS = env.int("TAMEDLEVY_WORKERS", default=0)
# Paths simulated together in one vectorised batch. Memory grows with
# batch size times 2^reference_level.
TAMEDLEVY_BATCH_SIZE = env.int("TAMEDLEVY_BATCH_SIZE", default=512)
TAMEDLEVY_OUTPUT_DIR = env.str("TAMEDLEVY_OUTPUT_DIR", default="")

# --- Logging ---

# Logs go to standard error only; standard output is reserved for reports.
LOG_LEVEL = env.str("LOG_LEVEL", default="INFO")
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "stderr": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "tamedlevy": {
            "handlers": ["stderr"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
    },
}
