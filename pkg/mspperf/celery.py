"""
Celery configuration for the msp-perf project.
"""

import os
from celery import Celery

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'mspperf.settings')

# New Relic integration for Celery
try:
    import newrelic.agent
    if os.getenv('NEW_RELIC_CONFIG_FILE'):
        newrelic.agent.initialize(os.getenv('NEW_RELIC_CONFIG_FILE'))
except ImportError:
    pass

app = Celery('mspperf')

# Load task modules from all registered Django apps
app.config_from_object('django.conf:settings', namespace='CELERY')

# Auto-discover tasks in all installed apps
app.autodiscover_tasks()
