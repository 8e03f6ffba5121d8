"""
Django settings for mtdc_opf project.

The project hosts the AC/DC optimal power flow library (network, formulation,
partitioner, nlp, admm, aladin apps) and the experiment harness. Numerical
defaults for every solver live at the bottom of this file and are read through
django.conf.settings.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/4.2/ref/settings/
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-mtdc-opf-local-experiments-only')

DEBUG = os.getenv('DEBUG', 'True') == 'True'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'core',
    'network',
    'formulation',
    'partitioner',
    'nlp',
    'admm',
    'aladin',
    'harness',
]

MIDDLEWARE = []

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': LOG_LEVEL,
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
        'solver_file': {
            'level': 'DEBUG',
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'solver_trace.log',
            'formatter': 'verbose',
            'delay': True,
        },
        'distributed_file': {
            'level': 'INFO',
            'class': 'logging.FileHandler',
            'filename': BASE_DIR / 'distributed.log',
            'formatter': 'verbose',
            'delay': True,
        },
    },
    'loggers': {
        # Interior-point iterations are chatty, keep them off the console.
        'solver_trace': {
            'handlers': ['solver_file'],
            'level': 'DEBUG',
            'propagate': False,
        },
        'distributed': {
            'handlers': ['console', 'distributed_file'],
            'level': 'INFO',
            'propagate': False,
        },
        'harness': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
    }
}


# Database
# Only the harness stores anything (cached reference solutions, run records).

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('DATABASE_PATH', BASE_DIR / 'db.sqlite3'),
    }
}


# Internationalization
# https://docs.djangoproject.com/en/4.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Interior-point solver defaults (nlp app).

NLP_SOLVER = {
    'TOL': 1e-8,
    'ACCEPTABLE_TOL': 1e-6,
    'MAX_ITER': 200,
    'MU_INIT': 0.1,
    'MU_REDUCTION': 0.2,
    'MU_SUPERLINEAR': 1.5,
    'BARRIER_TOL_FACTOR': 10.0,
    'WARM_MU_INIT': 1e-4,
    'WARM_BOUND_PUSH': 1e-6,
    'TAU_MIN': 0.99,
    'ACTIVITY_TOL': 1e-6,
    'BOUND_PUSH': 1e-4,
    'REG_INIT': 1e-8,
    'REG_GROWTH': 10.0,
    'REG_MAX': 1e10,
    'OBJ_SCALING_MAX_GRADIENT': 100.0,
}

# ADMM and ALADIN defaults, per algorithm.

DISTRIBUTED = {
    'EPSILON': 1e-4,
    'THREADS': 1,
    'ADMM': {
        'RHO': 1e4,
        'MAX_ITER': 30000,
    },
    'ALADIN_EXACT': {
        'RHO': 1e2,
        'MU': 1e3,
        'MAX_ITER': 200,
    },
    'ALADIN_BFGS': {
        'RHO': 1e4,
        'MU': 1e3,
        'MAX_ITER': 200,
    },
    'HESSIAN_FLOOR': 1e-6,
    'BFGS_DAMPING': 0.2,
    'RHO_GROWTH': 1.0,
    'RHO_MAX': 1e8,
    'QP_REGULARIZATION': 1e-10,
    # 'literal': z⁺ = x + α₁(x − z) + α₂Δx; 'standard': z⁺ = z + α₁(x − z) + α₂Δx.
    'UPDATE_FORM': 'literal',
}

# Physical model defaults (formulation and network apps).

OPF_MODEL = {
    'LOSS_WEIGHT': 10.0,
    'TIE_LINE_R': 0.0,
    'TIE_LINE_X': 0.01,
}

HARNESS = {
    'OUTPUT_DIR': BASE_DIR / 'runs',
    'REFERENCE_TOL': 1e-8,
}
