"""Deterministic synthetic hand fixtures for tests, demos and benchmarks.

The hand here is a minimal three-finger manipulator with 7 revolute joints
(one spread joint on the first finger, proximal + distal curl per finger),
which together with the free root gives 13 DOF. Link geometry is axis-
aligned boxes; the matching skin is the same set of boxes inflated by 2%
about their centers and merged into a single mesh, so every skin vertex
sits a known small distance from its own link and binds unambiguously.
"""

import os

import numpy as np
from scipy.spatial.transform import Rotation

from .hand import bind_skin, load_hand, skin_points_and_normals
from .mesh import TriangleMesh
from .meshio import dump_obj, load_mesh
from .objective import DEFAULT_LAMBDA_N_FRACTION
from .scene import (
    OptimizerConfig,
    Scene,
    ScenePatch,
    save_correspondence,
    save_scene,
)
from .shapes import box, planar_grid
from .transfer import Correspondence

SPREAD_LIMITS = (-0.6, 0.6)
CURL_LIMITS = (-1.6, 1.6)
SKIN_INFLATION = 1.02

FINGER_X = (-0.25, 0.0, 0.25)
PALM_EXTENTS = (0.8, 0.6, 0.2)
CARRIER_EXTENTS = (0.1, 0.1, 0.1)
PROX_EXTENTS = (0.12, 0.3, 0.12)
DIST_EXTENTS = (0.1, 0.25, 0.1)


def _layout():
    """Static description of links and joints in file order.

    Links: (name, extents, mesh center in link frame, world frame origin at
    rest). Joints: (name, parent, child, origin xyz in parent frame, axis,
    limits). The first finger hangs off a spread carrier; rest-pose frames
    chain by pure translation, so world boxes stay axis-aligned.
    """
    links = [("palm", PALM_EXTENTS, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))]
    joints = []
    for f, x in enumerate(FINGER_X):
        if f == 0:
            links.append(("carrier", CARRIER_EXTENTS, (0.0, 0.05, 0.0),
                          (x, 0.3, 0.0)))
            joints.append(("spread", "palm", "carrier", (x, 0.3, 0.0),
                           (0.0, 0.0, 1.0), SPREAD_LIMITS))
            prox_parent, prox_origin = "carrier", (0.0, 0.1, 0.0)
            prox_frame = (x, 0.4, 0.0)
        else:
            prox_parent, prox_origin = "palm", (x, 0.3, 0.0)
            prox_frame = (x, 0.3, 0.0)
        prox = f"f{f}_proximal"
        dist = f"f{f}_distal"
        links.append((prox, PROX_EXTENTS, (0.0, 0.15, 0.0), prox_frame))
        links.append((dist, DIST_EXTENTS, (0.0, 0.125, 0.0),
                      (prox_frame[0], prox_frame[1] + 0.3, prox_frame[2])))
        joints.append((f"{prox}_joint", prox_parent, prox, prox_origin,
                       (1.0, 0.0, 0.0), CURL_LIMITS))
        joints.append((f"{dist}_joint", prox, dist, (0.0, 0.3, 0.0),
                       (1.0, 0.0, 0.0), CURL_LIMITS))
    return links, joints


def write_synthetic_hand(directory, limit_overrides=None):
    """Write the 13-DOF hand description plus link meshes; return its path.

    ``limit_overrides`` maps a joint name to replacement ``(lower, upper)``
    limits, which is how tests and benchmarks produce constrained variants
    of the same hand.
    """
    os.makedirs(directory, exist_ok=True)
    links, joints = _layout()
    overrides = dict(limit_overrides or {})

    link_xml = []
    for name, extents, center, _ in links:
        mesh_file = f"{name}.obj"
        dump_obj(box(extents, subdivisions=1, center=center),
                 os.path.join(directory, mesh_file))
        link_xml.append(
            f'  <link name="{name}">\n'
            f'    <collision><geometry><mesh filename="{mesh_file}"/>'
            f'</geometry></collision>\n'
            f'  </link>'
        )

    joint_xml = []
    for name, parent, child, xyz, axis, limits in joints:
        lo, hi = overrides.pop(name, limits)
        if lo >= hi:
            raise ValueError(f"joint {name!r}: empty limit range [{lo}, {hi}]")
        joint_xml.append(
            f'  <joint name="{name}" type="revolute">\n'
            f'    <parent link="{parent}"/>\n'
            f'    <child link="{child}"/>\n'
            f'    <origin xyz="{xyz[0]} {xyz[1]} {xyz[2]}"/>\n'
            f'    <axis xyz="{axis[0]} {axis[1]} {axis[2]}"/>\n'
            f'    <limit lower="{lo}" upper="{hi}"/>\n'
            f'  </joint>'
        )

    if overrides:
        raise ValueError(
            f"limit overrides name unknown joints: {sorted(overrides)}")

    text = ('<robot name="synthetic13">\n'
            + "\n".join(link_xml) + "\n"
            + "\n".join(joint_xml) + "\n</robot>\n")
    path = os.path.join(directory, "hand.urdf")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def write_synthetic_skin(directory, filename="skin.obj"):
    """Write the hand's skin: inflated link boxes merged into one mesh.

    Components are disjoint closed surfaces, one per link, in the rest-pose
    world frame; vertex order per component matches the link mesh, so the
    k-th skin vertex of a component inflates the k-th link vertex.
    """
    os.makedirs(directory, exist_ok=True)
    links, _ = _layout()
    verts = []
    faces = []
    offset = 0
    for _, extents, center, frame in links:
        world_center = np.asarray(frame) + np.asarray(center)
        inflated = tuple(e * SKIN_INFLATION for e in extents)
        part = box(inflated, subdivisions=1, center=world_center)
        verts.append(part.vertices)
        faces.append(part.faces + offset)
        offset += part.n_vertices
    skin = TriangleMesh(np.vstack(verts), np.vstack(faces))
    path = os.path.join(directory, filename)
    dump_obj(skin, path)
    return path


GRASP_CURL = 1.1
GRASP_FINGERS = (1, 2)
GRASP_LAMBDA_N_SCALE = 0.1


def _find_vertex(mesh, position, atol=1e-9):
    hits = np.nonzero(
        np.all(np.isclose(mesh.vertices, position, atol=atol), axis=1))[0]
    if len(hits) != 1:
        raise ValueError(
            f"expected exactly one vertex at {tuple(position)}, "
            f"found {len(hits)}"
        )
    return int(hits[0])


def _one_ring(mesh, vertex):
    e = mesh.edges
    ring = np.concatenate([e[e[:, 0] == vertex, 1], e[e[:, 1] == vertex, 0]])
    return sorted(int(v) for v in np.unique(ring) if v != vertex)


def grasp_pose(hand, curl=GRASP_CURL, placement=None):
    """The pose that curls fingers 1 and 2 onto the matched box.

    With a placement transform the root takes the placement's rotation
    vector and translation, which moves the whole hand rigidly with the
    object; finger joints are unchanged. Joint values are clipped into the
    hand's limits, so on a limit-tightened hand the returned pose is merely
    the nearest feasible approximation.
    """
    theta = np.array(hand.theta_rest)
    dof = {j.name: j.dof_index for j in hand.joints if j.dof_index >= 0}
    for f in GRASP_FINGERS:
        theta[dof[f"f{f}_proximal_joint"]] = curl
        theta[dof[f"f{f}_distal_joint"]] = curl
    if placement is not None:
        placement = np.asarray(placement, dtype=np.float64)
        theta[:3] = placement[:3, 3]
        theta[3:6] = Rotation.from_matrix(placement[:3, :3]).as_rotvec()
    return np.clip(theta, hand.theta_lower, hand.theta_upper)


def poor_init_placement(distance=0.8):
    """Object flipped half a turn and moved behind the palm."""
    placement = np.eye(4)
    placement[:3, :3] = Rotation.from_rotvec([0.0, np.pi, 0.0]).as_matrix()
    placement[2, 3] = -float(distance)
    return placement


def write_synthetic_scene(directory, curl=GRASP_CURL, placement=None,
                          limit_overrides=None, seed=7,
                          name="synthetic-grasp"):
    """Write a hand + box scene with a known exactly reaching pose.

    The box is sized from the hand itself: with fingers 1 and 2 curled by
    ``curl`` at both joints, the two fingertip skin vertices and the palm
    center vertex fix the box extents and position so that its two top
    front corners and its back edge midpoint land on those skin vertices
    simultaneously. The scene file, the exact pair correspondence file and
    all meshes go into ``directory``.

    Returns a dict with the file paths, the reaching pose ``theta_star``
    (exact up to rounding unless ``limit_overrides`` clamps a grasp joint),
    the contact vertex pairs and the object bbox diagonal.
    """
    os.makedirs(directory, exist_ok=True)
    urdf_path = write_synthetic_hand(directory, limit_overrides)
    skin_path = write_synthetic_skin(directory)
    hand = load_hand(urdf_path)
    skin = load_mesh(skin_path)
    binding = bind_skin(hand, skin)

    # fingertip contacts sit on the front edge midpoint of each distal
    # skin box; the palm contact is the front face center
    links = {entry[0]: entry for entry in _layout()[0]}
    skin_targets = []
    for f in GRASP_FINGERS:
        _, extents, center, frame = links[f"f{f}_distal"]
        world = np.asarray(frame) + np.asarray(center)
        half = np.asarray(extents) * SKIN_INFLATION / 2.0
        skin_targets.append(world + (0.0, half[1], half[2]))
    palm_half = np.asarray(PALM_EXTENTS) * SKIN_INFLATION / 2.0
    skin_targets.append(np.asarray(links["palm"][3]) + (0.0, 0.0, palm_half[2]))
    skin_ids = [_find_vertex(skin, t) for t in skin_targets]

    # contact positions at the nominal (unplaced) grasp pose determine the
    # box: tips pin the top front corners, the palm pins the back edge
    # midpoint, and the three closure equations solve for the extents and
    # the box center; nominal limits apply so the object does not depend
    # on any limit override
    theta_nominal = np.zeros(hand.n_dofs)
    dof = {j.name: j.dof_index for j in hand.joints if j.dof_index >= 0}
    clamped = float(np.clip(curl, *CURL_LIMITS))
    for f in GRASP_FINGERS:
        theta_nominal[dof[f"f{f}_proximal_joint"]] = clamped
        theta_nominal[dof[f"f{f}_distal_joint"]] = clamped
    points, _ = skin_points_and_normals(binding, hand, theta_nominal,
                                        skin_ids)
    s1, s2, palm = points
    if abs(s1[0] - palm[0]) > 1e-9:
        raise ValueError("fingertip and palm contacts must share an x plane")
    ex = s2[0] - s1[0]
    ey = 2.0 * (s1[1] - palm[1])
    ez = s1[2] - palm[2]
    if min(ex, ey, ez) <= 0:
        raise ValueError(
            f"curl {curl} does not wrap the fingers in front of the palm")

    object_path = os.path.join(directory, "object.obj")
    dump_obj(box((ex, ey, ez), subdivisions=1), object_path)
    obj = load_mesh(object_path)
    corners = [
        _find_vertex(obj, (-ex / 2.0, ey / 2.0, ez / 2.0)),
        _find_vertex(obj, (ex / 2.0, ey / 2.0, ez / 2.0)),
        _find_vertex(obj, (-ex / 2.0, 0.0, -ez / 2.0)),
    ]

    shift = np.eye(4)
    shift[:3, 3] = s1 - obj.vertices[corners[0]]
    pose = shift if placement is None else np.asarray(placement) @ shift

    labels = [f"f{f}_tip" for f in GRASP_FINGERS] + ["palm"]
    dirs = [(1.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)]
    patches = []
    correspondences = {}
    for label, corner, sid, direction in zip(labels, corners, skin_ids, dirs):
        patches.append(ScenePatch(label, corner, _one_ring(obj, corner),
                                  sid, direction, direction))
        correspondences[label] = Correspondence([(corner, sid)], [0.0], [True])

    # a box corner normal can never anti-align with a fingertip edge
    # normal, so a full-weight normal term would drag the contacts off the
    # exactly reaching pose; scaling it down keeps distance dominant
    diag = hand.rest_bbox_diagonal()
    lam_n = GRASP_LAMBDA_N_SCALE * DEFAULT_LAMBDA_N_FRACTION * diag * diag
    optimizer = OptimizerConfig(lambda_n=lam_n)
    scene = Scene(object_mesh="object.obj", hand="hand.urdf", skin="skin.obj",
                  patches=patches, object_pose=pose, optimizer=optimizer,
                  seed=seed, name=name, base_dir=directory)
    scene_path = save_scene(scene, os.path.join(directory, "scene.json"))
    correspondence_path = save_correspondence(
        correspondences, os.path.join(directory, "correspondence.json"),
        scene_name=name)

    return {
        "scene": scene_path,
        "correspondence": correspondence_path,
        "object": object_path,
        "hand": urdf_path,
        "skin": skin_path,
        "theta_star": grasp_pose(hand, curl=curl, placement=placement),
        "pairs": {label: (corner, sid)
                  for label, corner, sid in zip(labels, corners, skin_ids)},
        "extents": (float(ex), float(ey), float(ez)),
        "pose": pose,
        "bbox_diagonal": float(np.linalg.norm((ex, ey, ez))),
    }


def write_identity_scene(directory, name="identity"):
    """Scene whose object is the skin mesh itself.

    Transfer between a mesh and itself with matching roots and directions
    must reproduce every pair identically, so this scene pins the
    zero-residual end of the transfer pipeline.
    """
    os.makedirs(directory, exist_ok=True)
    urdf_path = write_synthetic_hand(directory)
    skin_path = write_synthetic_skin(directory)
    skin = load_mesh(skin_path)
    palm_half = np.asarray(PALM_EXTENTS) * SKIN_INFLATION / 2.0
    root = _find_vertex(skin, (0.0, 0.0, palm_half[2]))
    patch = ScenePatch("palm", root, _one_ring(skin, root), root,
                       (1.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    scene = Scene(object_mesh="skin.obj", hand="hand.urdf", skin="skin.obj",
                  patches=[patch], name=name, base_dir=directory)
    return save_scene(scene, os.path.join(directory, "scene.json"))


def write_two_grid_scene(directory, coarse=9, fine=17, name="two-grid"):
    """Planar transfer scene: coarse object grid onto a finer skin grid.

    Both grids cover the same square, so every coarse lattice point exists
    on the fine grid and transfer residuals stay below half the fine
    spacing. The hand is unused by transfer but keeps the scene loadable
    everywhere.
    """
    if (coarse - 1) * 2 != fine - 1:
        raise ValueError("fine grid must halve the coarse spacing")
    os.makedirs(directory, exist_ok=True)
    write_synthetic_hand(directory)
    span = float(coarse - 1)
    obj = planar_grid(coarse, spacing=1.0)
    fine_mesh = planar_grid(fine, spacing=span / (fine - 1))
    dump_obj(obj, os.path.join(directory, "object.obj"))
    dump_obj(fine_mesh, os.path.join(directory, "skin.obj"))
    mid = coarse // 2
    root = mid * coarse + mid
    skin_root = _find_vertex(fine_mesh, obj.vertices[root])
    ring = int(0.3 * span)
    boundary = []
    for i in range(mid - ring, mid + ring + 1):
        for j in (mid - ring, mid + ring):
            boundary += [j * coarse + i, i * coarse + j]
    patch = ScenePatch("center", root, sorted(set(boundary)), skin_root,
                       (1.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    scene = Scene(object_mesh="object.obj", hand="hand.urdf", skin="skin.obj",
                  patches=[patch], name=name, base_dir=directory)
    return save_scene(scene, os.path.join(directory, "scene.json"))


def write_presolved_scene(directory, name="presolved"):
    """Scene already solved by the rest pose.

    The object clones the palm's skin box in place, pairs each sampled
    vertex with itself and turns the normal term off, so the objective is
    exactly zero at rest. One optimization call must recognize that.
    """
    os.makedirs(directory, exist_ok=True)
    urdf_path = write_synthetic_hand(directory)
    skin_path = write_synthetic_skin(directory)
    skin = load_mesh(skin_path)
    clone = box(tuple(e * SKIN_INFLATION for e in PALM_EXTENTS),
                subdivisions=1)
    object_path = os.path.join(directory, "object.obj")
    dump_obj(clone, object_path)
    obj = load_mesh(object_path)
    if not np.array_equal(obj.vertices, skin.vertices[:obj.n_vertices]):
        raise ValueError("object clone must replicate the palm skin box")

    ids = list(range(0, obj.n_vertices, max(1, obj.n_vertices // 6)))[:6]
    patches = []
    correspondences = {}
    for k, vid in enumerate(ids):
        label = f"palm-{k}"
        patches.append(ScenePatch(label, vid, _one_ring(obj, vid), vid,
                                  (1.0, 0.0, 1.0), (1.0, 0.0, 1.0)))
        correspondences[label] = Correspondence([(vid, vid)], [0.0], [True])
    optimizer = OptimizerConfig(lambda_n=0.0, max_calls=1)
    scene = Scene(object_mesh="object.obj", hand="hand.urdf", skin="skin.obj",
                  patches=patches, optimizer=optimizer, name=name,
                  base_dir=directory)
    scene_path = save_scene(scene, os.path.join(directory, "scene.json"))
    correspondence_path = save_correspondence(
        correspondences, os.path.join(directory, "correspondence.json"),
        scene_name=name)
    return {"scene": scene_path, "correspondence": correspondence_path,
            "pairs": ids}
