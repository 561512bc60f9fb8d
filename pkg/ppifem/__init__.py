# Bilinear partially penalized immersed finite elements for triple-junction interface problems
from .config import settings

__version__ = settings.version
