"""
Services for the code catalog, protocol runs and experiment sweeps.
"""
from .catalog_service import CatalogService
from .protocol_service import ProtocolService
from .experiment_service import ExperimentService

__all__ = ['CatalogService', 'ProtocolService', 'ExperimentService']
