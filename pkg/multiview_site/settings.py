from pathlib import Path

import environ

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

env = environ.Env(
    MULTIVIEW_DEBUG=(bool, True),
    MULTIVIEW_LOG_LEVEL=(str, "INFO"),
    MULTIVIEW_N_JOBS=(int, 1),
    MULTIVIEW_OUTPUT_ROOT=(str, str(BASE_DIR / "runs")),
)

SECRET_KEY = env.str("MULTIVIEW_SECRET_KEY", default="dev-secret-key-change-later")  # okay for local dev
DEBUG = env("MULTIVIEW_DEBUG")

ALLOWED_HOSTS = ["localhost", "127.0.0.1"]

# Application definition

INSTALLED_APPS = [
    "django.contrib.admin",
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "django.contrib.sessions",
    "django.contrib.messages",
    "django.contrib.staticfiles",

    "multiview",
]

MIDDLEWARE = [
    "django.middleware.security.SecurityMiddleware",
    "django.contrib.sessions.middleware.SessionMiddleware",
    "django.middleware.common.CommonMiddleware",
    "django.middleware.csrf.CsrfViewMiddleware",
    "django.contrib.auth.middleware.AuthenticationMiddleware",
    "django.contrib.messages.middleware.MessageMiddleware",
    "django.middleware.clickjacking.XFrameOptionsMiddleware",
]

ROOT_URLCONF = "multiview_site.urls"

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

WSGI_APPLICATION = "multiview_site.wsgi.application"

# Database (sqlite for dev); holds ExperimentRun provenance rows only
DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}

AUTH_PASSWORD_VALIDATORS = []

LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = True
USE_TZ = True

STATIC_URL = "/static/"

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# --- Logging ---

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s %(message)s"},
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "multiview": {
            "handlers": ["console"],
            "level": env("MULTIVIEW_LOG_LEVEL"),
            "propagate": False,
        },
    },
}

# --- Multiview runs ---

# where commands write when --out is not given
MULTIVIEW_OUTPUT_ROOT = Path(env("MULTIVIEW_OUTPUT_ROOT"))

# joblib workers for pool training, per-view updates and repetitions
MULTIVIEW_N_JOBS = env("MULTIVIEW_N_JOBS")

# lowest-precedence run defaults (flags > --config file > these)
MULTIVIEW_DEFAULTS = {
    "T": 2,
    "epsilon": None,          # None -> 1/(2m)
    "rho_solver": "entropic",
    "rho_lambda": None,       # None -> mean(view scores) + 1e-12
    "tolerance": 0.0,
    "line_search": True,
    "depths": None,           # None -> 1..max(1, ceil(log2 m) - 1)
    "baseline_depth": None,   # None -> deepest default pool depth
    "m_train": 100,
    "test_fraction": 0.25,
    "repetitions": 20,
    "negative_ratio": 1.0,
    "overlap": 0.25,
    "methods": ["mono", "concat", "fusion", "mv_uniform", "mwmvc2"],
}

# defaults of `manage.py synth`
MULTIVIEW_SYNTH_DEFAULTS = {
    "m": 400,
    "V": 3,
    "d": 5,
    "redundancy": 0.0,
    "noise_views": 1,
    "class_sep": 1.0,
}
