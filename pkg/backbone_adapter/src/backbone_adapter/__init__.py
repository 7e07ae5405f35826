"""Export mask-position representations from a local language model to DRPR."""

from .drpr_writer import DrprHeader, validate, write_drpr
from .exporter import ExportSpec, ModelLoad, TemplateMismatch, export

__all__ = [
    "DrprHeader",
    "ExportSpec",
    "ModelLoad",
    "TemplateMismatch",
    "export",
    "validate",
    "write_drpr",
]
