"""
NFCE-lab URL configuration.

Only the Django admin is exposed; it lists experiments, training runs and
evaluation records written by the management commands.
"""

from django.contrib import admin
from django.urls import path

urlpatterns = [
    path("admin/", admin.site.urls),
]
