import os

# Default to local settings if not specified
environment = os.environ.get('DJANGO_ENVIRONMENT', 'local')

if environment == 'cluster':
    from .cluster import *
else:
    from .local import *
