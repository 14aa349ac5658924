"""Semi-supervised multi-view stereo toolkit.

Warping and the photometric loss, plane-sweep probability volumes, the
consistency and style losses, whitening-colouring transfer, the edge-aware
propagation filter, depth fusion, point-cloud evaluation and scene MMD.
"""

from . import dataio, evaluation, fusion, geometry, gpm, losses, mmd, style, sweep, synth
from ._accel import backend, set_backend, using_backend
from .errors import BehindCameraError, MVSError, NoSupervisionError, ParseError
from .fusion import FusionConfig, PointCloud
from .geometry import DepthMap, Extrinsics, Intrinsics, View

__version__ = "0.1.0"

__all__ = [
    "BehindCameraError", "DepthMap", "Extrinsics", "FusionConfig", "Intrinsics", "MVSError",
    "NoSupervisionError", "ParseError", "PointCloud", "View", "backend", "dataio", "evaluation",
    "fusion", "geometry", "gpm", "losses", "mmd", "set_backend", "style", "sweep", "synth",
    "using_backend",
]
