"""Utils package initialization."""

from . import (
    errors,
    geometry,
    image_utils,
    keyvalue_utils,
    random_utils
)

__all__ = [
    "errors",
    "geometry",
    "image_utils",
    "keyvalue_utils",
    "random_utils"
]
