"""
WSGI config for toxhub project.

It exposes the WSGI callable as a module-level variable named ``application``.
"""

import os

from django.core.wsgi import get_wsgi_application

# Use production settings if the TOXHUB_ENVIRONMENT variable is set to 'production'
if os.environ.get('TOXHUB_ENVIRONMENT') == 'production':
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'toxhub.settings_prod')
else:
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'toxhub.settings')

application = get_wsgi_application()
