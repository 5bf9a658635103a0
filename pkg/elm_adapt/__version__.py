"""
elm-adapt Version Information
"""

__version__ = "0.3.0"
__version_info__ = (0, 3, 0)
__title__ = "elm-adapt"
__description__ = "Adaptive Eulerian-Lagrangian finite elements for convection-diffusion"
__license__ = "MIT"

FEATURES = {
    "dimensions": (1, 2),
    "characteristic_schemes": ("implicit-midpoint", "explicit-midpoint", "volume-preserving-3d"),
    "indicators": ("temporal", "spatial", "coarsening"),
    "benchmarks": 6,
}


def get_version():
    """Return version string."""
    return __version__


def get_version_info():
    """Return detailed version information."""
    return {
        "version": __version__,
        "title": __title__,
        "description": __description__,
        "features": FEATURES,
    }
