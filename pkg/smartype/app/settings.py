"""
Django settings for the smartype project.

The project has no web surface: Django provides the settings layer, the
management command runner and the test runner. Pipeline defaults live in
the SMARTYPE dict below and are overridden by a pipeline config file and
command-line flags.
"""

from pathlib import Path

from smartype.app.config import CONFIG

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = CONFIG.get('APP_SECRET', 'smartype-insecure-key')

DEBUG = CONFIG.get('DEBUG', False)

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'smartype.core.apps.CoreConfig',
]

# No persistence layer: datasets, models and runs are files.
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

DATA_DIR = BASE_DIR.parent / CONFIG.get('DATA_DIR', 'data')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'smartype': {
            'handlers': ['console'],
            'level': CONFIG.get('LOGGING_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}

SMARTYPE = {
    'SEED': 42,
    'TOP_K': 10,
    'N_FOLDS': 5,
    'SVM': {
        'C': 1.0,
        'EPOCHS': 20,
        'BATCH_SIZE': 32,
    },
    'FUSION': {
        'K1': 1.2,
        'B': 0.75,
        'EC_K': 20,
        'AGGREGATION': 'sum',
    },
    'XMC': {
        'BRANCHING': 8,
        'MAX_LEAF': 64,
        'MAX_LEAF_WIKIDATA': 256,
        'BEAM': 4,
        'C': 1.0,
        'EPOCHS': 20,
        'RANKER_EPOCHS': 10,
        'HOLDOUT_FOLDS': 5,
        'MAX_NEGATIVES': 20,
        'N_JOBS': 1,
    },
}
