"""
Celery configuration for NFCE-lab.

Long-running experiment stages run as background tasks:
- Dataset generation for a scenario
- Training of region classifier, single-region and federated estimators
- NMSE evaluation sweeps
"""

import os

from celery import Celery

# Set the default Django settings module for the 'celery' program.
os.environ.setdefault("DJANGO_SETTINGS_MODULE", "nfcelab.settings")

app = Celery("nfcelab")

# Using a string here means the worker doesn't have to serialize
# the configuration object to child processes.
app.config_from_object("django.conf:settings", namespace="CELERY")

# Load task modules from all registered Django apps.
app.autodiscover_tasks()
