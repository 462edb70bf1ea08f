"""Semi-automated nuchal translucency thickness measurement toolkit.

Pipeline stages: median despeckling, mean-shift segmentation of an
operator-chosen ROI, Canny edge enhancement, blob-based thickness
measurement in millimetres, and classification against per-week norms.
A speckle phantom generator with exact ground truth backs the test suite.
"""

from ntscan.image import GrayImage, Roi
from ntscan.pipeline import PipelineConfig, run_pipeline

__all__ = ["GrayImage", "PipelineConfig", "Roi", "run_pipeline"]
__version__ = "0.1.0"
