"""
Utility classes for file I/O, error reporting and log sinks.
"""
from .file_handler import FileHandler
from .error_handler import ErrorHandler

__all__ = ['FileHandler', 'ErrorHandler']
