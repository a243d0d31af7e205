"""Bridge from trained segmentation models to dipe-loadable datasets.

Treats models as opaque inference callables, runs them over a dataset
with ground truth, and writes the directory layout the dipe toolkit
reads: a manifest, per-model tensor files, and run-length ground truth.
"""

from .export import ClampWarning, ExportError, ModelSpec, SliceSample, export
from .writer import encode_runs, write_manifest, write_tensor, write_truth_csv

__version__ = "0.1.0"

__all__ = [
    "ClampWarning",
    "ExportError",
    "ModelSpec",
    "SliceSample",
    "export",
    "encode_runs",
    "write_manifest",
    "write_tensor",
    "write_truth_csv",
    "__version__",
]
