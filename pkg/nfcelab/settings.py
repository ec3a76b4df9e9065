"""
Django settings for the NFCE-lab project.

NFCE-lab synthesizes near-field IRS-aided multi-user MIMO channels, simulates
pilot transmission and benchmarks classical and learned channel estimators.
The Django project provides configuration, run bookkeeping, management
commands and background tasks around the numerical apps.
"""

from pathlib import Path

import environ
import psutil

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Environment variables
env = environ.Env(DEBUG=(bool, False))
environ.Env.read_env(BASE_DIR / ".env")

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = env("SECRET_KEY", default="nfcelab-local-development-key")

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = env("DEBUG")

ALLOWED_HOSTS = env.list("ALLOWED_HOSTS", default=[])


# Application definition

INSTALLED_APPS = [
    "django.contrib.admin",
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "django.contrib.sessions",
    "django.contrib.messages",
    # Local apps
    "apps.utils",
    "apps.physics",
    "apps.estimation",
    "apps.learning",
    "apps.experiments",
]

ROOT_URLCONF = "nfcelab.urls"

WSGI_APPLICATION = "nfcelab.wsgi.application"

MIDDLEWARE = [
    "django.middleware.security.SecurityMiddleware",
    "django.contrib.sessions.middleware.SessionMiddleware",
    "django.middleware.common.CommonMiddleware",
    "django.contrib.auth.middleware.AuthenticationMiddleware",
    "django.contrib.messages.middleware.MessageMiddleware",
]

TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {
            "context_processors": [
                "django.template.context_processors.request",
                "django.contrib.auth.context_processors.auth",
                "django.contrib.messages.context_processors.messages",
            ],
        },
    },
]


# Database

# Use DATABASE_URL from environment
try:
    DATABASES = {"default": env.db()}
    if DATABASES["default"]["ENGINE"] == "django.db.backends.postgresql":
        DATABASES["default"].update({"TEST": {"NAME": "test_nfcelab_db"}})
except Exception as e:
    # Fallback to SQLite for local runs
    print(f"⚠️  DATABASE_URL not usable ({e}), falling back to SQLite")
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": BASE_DIR / "db.sqlite3",
        }
    }


LANGUAGE_CODE = "nl-nl"

TIME_ZONE = "Europe/Amsterdam"

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"


# Logging

NFCE_LOG_LEVEL = env("NFCE_LOG_LEVEL", default="INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {name} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {"handlers": ["console"], "level": NFCE_LOG_LEVEL},
    "loggers": {
        "apps": {
            "handlers": ["console"],
            "level": NFCE_LOG_LEVEL,
            "propagate": False,
        },
    },
}


# Celery Configuration
CELERY_BROKER_URL = env("CELERY_BROKER_URL", default="redis://localhost:6379/0")
CELERY_RESULT_BACKEND = env("CELERY_RESULT_BACKEND", default="redis://localhost:6379/0")
CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
CELERY_TIMEZONE = TIME_ZONE
CELERY_TASK_ALWAYS_EAGER = env.bool("CELERY_TASK_ALWAYS_EAGER", default=False)

# Training jobs hold large tensors; one task per worker child at a time
CELERY_WORKER_PREFETCH_MULTIPLIER = 1
CELERY_WORKER_MAX_TASKS_PER_CHILD = 10

CELERY_TASK_ROUTES = {
    "apps.experiments.tasks.train_estimator_async": {"queue": "ml_tasks"},
    "apps.experiments.tasks.evaluate_estimators_async": {"queue": "ml_tasks"},
}

CELERY_TASK_DEFAULT_QUEUE = "default"


# Experiment configuration
NFCE_OUTPUT_DIR = Path(env("NFCE_OUTPUT_DIR", default=str(BASE_DIR / "runs")))
NFCE_DEFAULT_SCENARIO = Path(
    env(
        "NFCE_DEFAULT_SCENARIO",
        default=str(BASE_DIR / "scenarios" / "desk_nf.scenario"),
    )
)
NFCE_PRECISION = env("NFCE_PRECISION", default="float64")
NFCE_TORCH_THREADS = env.int(
    "NFCE_TORCH_THREADS", default=max(1, psutil.cpu_count(logical=False) or 1)
)
NFCE_WORKERS = env.int("NFCE_WORKERS", default=1)
