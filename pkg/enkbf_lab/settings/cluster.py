from .base import *
import dj_database_url

# Batch runs on shared machines never run in debug
DEBUG = False

# Use secret key from environment
SECRET_KEY = env('SECRET_KEY')

# Shared run registry
database_url = env('DATABASE_URL')
DATABASES = {
    'default': dj_database_url.parse(database_url, conn_max_age=600)
}

# Seed pools default to the allocation size on batch nodes
LAB_THREADS = env.int('ENKBF_LAB_THREADS', default=os.cpu_count() or 1)
