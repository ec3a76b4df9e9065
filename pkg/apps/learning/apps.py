import logging

import torch
from django.apps import AppConfig
from django.conf import settings

logger = logging.getLogger(__name__)


class LearningConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "apps.learning"
    verbose_name = "Learned estimators"

    def ready(self):
        """Pin torch threading so seeded runs reproduce bit for bit."""
        torch.set_num_threads(settings.NFCE_TORCH_THREADS)
        torch.use_deterministic_algorithms(True)
        logger.debug(f"torch pinned to {settings.NFCE_TORCH_THREADS} threads")
