from pathlib import Path
import os
import environ

from enkbf_lab import __version__

# Initialize environ (without any defaults yet)
env = environ.Env()

# Build paths inside the project
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# Load .env file if it exists locally
env.read_env(os.path.join(BASE_DIR, '.env'))

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',
    'filtering',
    'experiments',
]

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Experiment harness
LAB_CODE_VERSION = __version__
LAB_THREADS = env.int('ENKBF_LAB_THREADS', default=1)
LAB_OUTPUT_DIR = Path(env('ENKBF_LAB_OUTPUT_DIR', default=str(BASE_DIR / 'runs')))
LAB_LOG_LEVEL = env('ENKBF_LAB_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'filtering': {'handlers': ['console'], 'level': LAB_LOG_LEVEL, 'propagate': False},
        'experiments': {'handlers': ['console'], 'level': LAB_LOG_LEVEL, 'propagate': False},
    },
}
