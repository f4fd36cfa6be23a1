"""Kernel-regularized curvature for point clouds, cells, and meshes."""

from .curvature import (
    CurvatureRequest,
    amc,
    amc_field,
    amc_orth,
    average_field,
    fv_l1_norm,
    regularized_first_variation,
    regularized_mass,
)
from .geometry import (
    CurvatureField,
    Plane,
    PointCloudVarifold,
    TriMesh,
    VolumetricVarifold,
    plane_distance,
    plane_from_basis,
    project,
    project_orth,
)
from .harness import (
    ConvergenceConfig,
    EpsSchedule,
    ResultRow,
    rel_error,
    run_convergence,
    selftest,
    slope,
)
from .kernels import KernelPair, KernelProfile, kernel_constants, make_pair, make_profile, nkp, \
    nkp_residual
from .metrics import DiscreteMeasure, bl_distance, bl_distance_varifolds, build_grid, \
    to_pointcloud, to_volumetric
from .shapes import SamplingSpec, ShapeSpec, circle, double_bubble, eight, ellipse, flower, \
    sample, two_circles
from .spatial import FixedRadiusIndex, radius_query
from .tangents import estimate_planes

__version__ = "0.1.0"
