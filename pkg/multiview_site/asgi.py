"""
ASGI config for multiview_site project.

Only the admin (ExperimentRun records) is served.
"""

import os

from django.core.asgi import get_asgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'multiview_site.settings')

application = get_asgi_application()
