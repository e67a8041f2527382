"""NeXt-TDNN speaker embedding inference and verification scoring."""

__version__ = "0.1.0"

from .model import Model, ModelConfig, count_macs, count_params, embed  # noqa: E402
from .blocks import Variant  # noqa: E402
