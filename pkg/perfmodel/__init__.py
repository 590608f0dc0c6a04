# Performance model Django app

__version__ = '1.0.0'
