"""
Django settings for the msp-perf project.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-msp-perf-local-only')

DEBUG = os.getenv('DEBUG', 'False').lower() == 'true'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'perfmodel',
]

# Database (run ledger only)
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('MSP_PERF_DB', str(BASE_DIR / 'msp_perf.sqlite3')),
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Celery: eager in-process unless a broker is configured
CELERY_BROKER_URL = os.getenv('MSP_PERF_BROKER_URL', '') or 'memory://'
CELERY_RESULT_BACKEND = os.getenv('MSP_PERF_RESULT_BACKEND', 'cache+memory://')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE

CELERY_TASK_ALWAYS_EAGER = os.getenv(
    'MSP_PERF_TASK_EAGER', 'false' if os.getenv('MSP_PERF_BROKER_URL') else 'true'
).lower() == 'true'
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_BROKER_CONNECTION_RETRY_ON_STARTUP = True

# Performance model settings
PERFMODEL_SETTINGS = {
    'MAX_STATES': int(os.getenv('MSP_PERF_MAX_STATES', 1_000_000)),
    'DIRECT_SOLVER_LIMIT': 50_000,
    'RESIDUAL_TOL': 1e-10,
    'ITERATIVE_MAX_SWEEPS': 1_000_000,
    'MAX_ERR': 1e-6,
    'MAX_OUTER': 10,
    'MAX_INNER': 10,
    'INITIAL_SUCCESS_PROB': 0.9,
    'DEFAULT_ACQUIRE_TIME_SECONDS': 120.0,
    'SIM_WARMUP_FRACTION': 0.2,
    'SIM_REPLICATIONS': 10,
    'SIM_HORIZON_ARRIVALS': 1e5,
    'VALIDATION_TOLERANCE': 0.10,
    'VALIDATION_PROBABILITY_ATOL': 0.01,
    'CONFIGS_DIR': BASE_DIR / 'configs',
}

# Create logs directory if it doesn't exist
LOGS_DIR = os.getenv('MSP_PERF_LOG_DIR', os.path.join(BASE_DIR, 'logs'))
os.makedirs(LOGS_DIR, exist_ok=True)

PERFMODEL_LOG_LEVEL = os.getenv('MSP_PERF_LOG', 'WARNING').upper()

# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
        'perfmodel_file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': os.path.join(LOGS_DIR, 'perfmodel.log'),
            'maxBytes': 1024 * 1024 * 10,  # 10MB
            'backupCount': 5,
            'formatter': 'verbose',
        },
        'celery_file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': os.path.join(LOGS_DIR, 'celery.log'),
            'maxBytes': 1024 * 1024 * 10,  # 10MB
            'backupCount': 5,
            'formatter': 'verbose',
        },
        'error_file': {
            'class': 'logging.handlers.RotatingFileHandler',
            'filename': os.path.join(LOGS_DIR, 'error.log'),
            'maxBytes': 1024 * 1024 * 10,  # 10MB
            'backupCount': 5,
            'formatter': 'verbose',
            'level': 'ERROR',
        },
    },
    'root': {
        'handlers': ['console', 'error_file'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': False,
        },
        'perfmodel': {
            'handlers': ['console', 'perfmodel_file', 'error_file'],
            'level': PERFMODEL_LOG_LEVEL,
            'propagate': False,
        },
        'celery': {
            'handlers': ['console', 'celery_file'],
            'level': 'WARNING',
            'propagate': False,
        },
    },
}
