"""Learned replacement for the AVS inter prediction filter.

Integer reference filter, tiny two-layer network with float32 inference,
model files, training and a desk-scale data pipeline.
"""

__version__ = "0.1.0"

from .interpf import BlockContext, filter_block
from .mlp import MlpModel, Scheme, learned_filter_block, mac_count, mlp_forward
from .model_io import export_model, import_model

__all__ = [
    "BlockContext",
    "MlpModel",
    "Scheme",
    "export_model",
    "filter_block",
    "import_model",
    "learned_filter_block",
    "mac_count",
    "mlp_forward",
]
