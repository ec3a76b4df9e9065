"""
WSGI config for the nfcelab project (serves the run-record admin).
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "nfcelab.settings")

application = get_wsgi_application()
