"""Contact-patch transfer between surfaces with grasp pose synthesis.

The package splits into a geometry stack (mesh, shapes, meshio, logmap,
patch, transfer) and a kinematics stack (hand, objective, solver, sequence),
tied together by scene descriptions, a benchmark harness, a CLI, and a
WebSocket service.
"""

from .mesh import MeshError, SpatialIndex, TriangleMesh, nearest_vertex
from .meshio import dump_obj, load_mesh
from .logmap import (
    LogmapChart,
    LogmapError,
    LogmapSolver,
    compute_logmap_heat,
    compute_logmap_oracle,
    logmap_to_point,
    wrap_angle,
)
from .patch import (
    ContactPatch,
    PatchError,
    downsample_boundary,
    load_patches,
    patches_from_scalars,
    save_patches,
)
from .transfer import (
    Correspondence,
    TransferError,
    TransferSpec,
    TransferWarning,
    transfer_patch,
)
from .hand import (
    ArticulatedHand,
    HandError,
    SkinBinding,
    apply_link_transforms,
    bind_skin,
    load_hand,
    skin_point_and_normal,
    skin_points_and_normals,
)
from .objective import ObjectiveError, PoseProblem, gamma_p
from .solver import (
    CallRecord,
    SolverError,
    SolveSession,
    available_backends,
)
from .sequence import (
    ManipulationTrack,
    SequenceError,
    export_animation,
    interpolate_patches,
    solve_track,
)
from .scene import (
    OptimizerConfig,
    Scene,
    SceneError,
    ScenePatch,
    build_problem,
    load_correspondence,
    load_scene,
    run_transfer,
    save_correspondence,
    save_scene,
    solve_scene,
)
from .bench import bench_scenes, format_csv, format_table
from .service import ServiceSession, serve, start_service

__version__ = "0.1.0"

__all__ = [
    "MeshError",
    "SpatialIndex",
    "TriangleMesh",
    "nearest_vertex",
    "dump_obj",
    "load_mesh",
    "LogmapChart",
    "LogmapError",
    "LogmapSolver",
    "compute_logmap_heat",
    "compute_logmap_oracle",
    "logmap_to_point",
    "wrap_angle",
    "ContactPatch",
    "PatchError",
    "downsample_boundary",
    "load_patches",
    "patches_from_scalars",
    "save_patches",
    "Correspondence",
    "TransferError",
    "TransferSpec",
    "TransferWarning",
    "transfer_patch",
    "ArticulatedHand",
    "HandError",
    "SkinBinding",
    "apply_link_transforms",
    "bind_skin",
    "load_hand",
    "skin_point_and_normal",
    "skin_points_and_normals",
    "ObjectiveError",
    "PoseProblem",
    "gamma_p",
    "CallRecord",
    "SolverError",
    "SolveSession",
    "available_backends",
    "ManipulationTrack",
    "SequenceError",
    "export_animation",
    "interpolate_patches",
    "solve_track",
    "OptimizerConfig",
    "Scene",
    "SceneError",
    "ScenePatch",
    "build_problem",
    "load_correspondence",
    "load_scene",
    "run_transfer",
    "save_correspondence",
    "save_scene",
    "solve_scene",
    "bench_scenes",
    "format_csv",
    "format_table",
    "ServiceSession",
    "serve",
    "start_service",
    "__version__",
]
