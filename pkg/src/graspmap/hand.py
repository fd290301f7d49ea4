"""Articulated hand model: links, joints, free root, FK, and skin binding.

A hand is loaded from a URDF-subset file (links with mesh references,
revolute/prismatic/fixed joints with limits). The DOF vector is laid out as
[root translation xyz, root rotation vector xyz, moving joints in file
order]; the free root contributes 6 DOF on top of the joint count.

The skin (one manifold mesh covering the whole manipulator) is bound to
links by nearest-neighbor projection onto the union of link mesh vertices:
a skin vertex within ``eps`` of some link's geometry rides rigidly with
that link, everything farther is left unbound and ignored downstream.
"""

import os
import xml.etree.ElementTree as ET

import numpy as np
from scipy.spatial.transform import Rotation

from .mesh import SpatialIndex, TriangleMesh
from .meshio import load_mesh

ROOT_DOFS = 6
ROOT_ROTATION_BOUND = 2.0 * np.pi
DEFAULT_EPS_FRACTION = 0.02


class HandError(ValueError):
    """Raised for malformed hand descriptions or kinematic misuse."""


def rotation_from_vector(w):
    """3x3 rotation matrix for a rotation-vector (exponential map)."""
    return Rotation.from_rotvec(np.asarray(w, dtype=np.float64)).as_matrix()


def _origin_transform(xyz, rpy):
    T = np.eye(4)
    if rpy is not None and np.any(rpy):
        # URDF rpy is fixed-axis roll/pitch/yaw
        T[:3, :3] = Rotation.from_euler("xyz", rpy).as_matrix()
    if xyz is not None:
        T[:3, 3] = xyz
    return T


def _parse_vec(text, default):
    if text is None:
        return np.asarray(default, dtype=np.float64)
    vals = [float(x) for x in text.split()]
    if len(vals) != 3:
        raise HandError(f"expected 3 values, got {text!r}")
    return np.asarray(vals, dtype=np.float64)


class Link:
    """A rigid body: a name plus optional geometry in the link frame."""

    def __init__(self, name, mesh=None, mesh_path=None):
        self.name = str(name)
        self.mesh = mesh
        self.mesh_path = mesh_path


class Joint:
    """Connection from a parent link to a child link.

    ``origin`` is the child frame at zero joint value; the joint motion
    (rotation or translation about ``axis``) is applied after it. Fixed
    joints carry no DOF and keep ``dof_index`` at -1.
    """

    def __init__(self, name, jtype, parent, child, origin, axis, lower, upper):
        self.name = str(name)
        self.jtype = str(jtype)
        self.parent = str(parent)
        self.child = str(child)
        self.origin = np.asarray(origin, dtype=np.float64)
        self.axis = np.asarray(axis, dtype=np.float64)
        self.lower = float(lower)
        self.upper = float(upper)
        self.dof_index = -1
        if self.jtype not in ("revolute", "prismatic", "fixed"):
            raise HandError(f"unsupported joint type {self.jtype!r}")
        if self.lower > self.upper:
            raise HandError(
                f"joint {self.name}: lower limit {self.lower} exceeds upper "
                f"{self.upper}"
            )
        ln = np.linalg.norm(self.axis)
        if self.jtype != "fixed":
            if ln < 1e-12:
                raise HandError(f"joint {self.name}: zero axis")
            self.axis = self.axis / ln

    @property
    def is_moving(self):
        return self.jtype != "fixed"

    def motion(self, value):
        """Local transform of the joint at ``value``."""
        T = np.eye(4)
        if self.jtype == "revolute":
            T[:3, :3] = rotation_from_vector(self.axis * value)
        elif self.jtype == "prismatic":
            T[:3, 3] = self.axis * value
        return T


class ArticulatedHand:
    """Link tree with a free 6-DOF root and box joint limits.

    The root link's world placement comes entirely from the first six DOFs
    (translation, then a rotation vector applied by exponential map); every
    other link chains through its parent joint. Construction validates the
    tree: exactly one root, no link with two parents, no cycles.
    """

    def __init__(self, links, joints, name="hand"):
        self.name = str(name)
        self.links = list(links)
        self.joints = list(joints)
        self._link_index = {}
        for i, link in enumerate(self.links):
            if link.name in self._link_index:
                raise HandError(f"duplicate link name {link.name!r}")
            self._link_index[link.name] = i

        parent_joint = {}
        for joint in self.joints:
            for end in (joint.parent, joint.child):
                if end not in self._link_index:
                    raise HandError(
                        f"joint {joint.name} references unknown link {end!r}"
                    )
            if joint.child in parent_joint:
                raise HandError(
                    f"link {joint.child!r} has more than one parent joint"
                )
            parent_joint[joint.child] = joint

        roots = [l.name for l in self.links if l.name not in parent_joint]
        if len(roots) != 1:
            raise HandError(
                f"hand needs exactly one root link, found {roots or 'none (cycle)'}"
            )
        self.root_link = self._link_index[roots[0]]

        # breadth-first order from the root; joints not reached lie on a
        # cycle or a disconnected island
        self._topo = []
        reached = {roots[0]}
        frontier = [roots[0]]
        while frontier:
            nxt = []
            for joint in self.joints:
                if joint.parent in frontier:
                    self._topo.append(joint)
                    reached.add(joint.child)
                    nxt.append(joint.child)
            frontier = nxt
        if len(reached) != len(self.links):
            missing = sorted(set(self._link_index) - reached)
            raise HandError(f"links unreachable from root (cycle?): {missing}")

        dof = ROOT_DOFS
        self.dof_names = ["root_tx", "root_ty", "root_tz",
                          "root_rx", "root_ry", "root_rz"]
        for joint in self.joints:
            if joint.is_moving:
                joint.dof_index = dof
                dof += 1
                self.dof_names.append(joint.name)
        self.n_dofs = dof

        lower = np.full(self.n_dofs, -np.inf)
        upper = np.full(self.n_dofs, np.inf)
        lower[3:6] = -ROOT_ROTATION_BOUND
        upper[3:6] = ROOT_ROTATION_BOUND
        for joint in self.joints:
            if joint.is_moving:
                lower[joint.dof_index] = joint.lower
                upper[joint.dof_index] = joint.upper
        self.theta_lower = lower
        self.theta_upper = upper
        self.theta_rest = np.clip(np.zeros(self.n_dofs), lower, upper)
        self._rest_points = None

    @property
    def n_links(self):
        return len(self.links)

    @property
    def translational_dofs(self):
        """Mask of DOFs measured in length units (root xyz, prismatic)."""
        mask = np.zeros(self.n_dofs, dtype=bool)
        mask[:3] = True
        for joint in self.joints:
            if joint.jtype == "prismatic":
                mask[joint.dof_index] = True
        return mask

    def link_id(self, name):
        try:
            return self._link_index[name]
        except KeyError:
            raise HandError(f"no link named {name!r}") from None

    def forward_kinematics(self, theta):
        """World transform of every link, (n_links, 4, 4)."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_dofs,):
            raise HandError(
                f"theta has {theta.shape} entries, hand has {self.n_dofs} DOFs"
            )
        T = np.zeros((self.n_links, 4, 4))
        root = np.eye(4)
        root[:3, :3] = rotation_from_vector(theta[3:6])
        root[:3, 3] = theta[:3]
        T[self.root_link] = root
        for joint in self._topo:
            parent = T[self._link_index[joint.parent]]
            value = theta[joint.dof_index] if joint.is_moving else 0.0
            T[self._link_index[joint.child]] = (
                parent @ joint.origin @ joint.motion(value)
            )
        return T

    def recenter_root_rotation(self, theta):
        """Equivalent theta with root rotation-vector norm below pi.

        The exponential map is 2pi-periodic along any axis; pulling the
        vector back near the origin keeps iterates away from the ||w|| = 2pi
        singularity between optimization calls.
        """
        out = np.array(theta, dtype=np.float64)
        w = out[3:6]
        n = np.linalg.norm(w)
        if n > np.pi:
            out[3:6] = w * (1.0 - 2.0 * np.pi / n)
        return out

    def rest_world_vertices(self):
        """Union of link mesh vertices at rest pose, with owning link ids."""
        if self._rest_points is None:
            T = self.forward_kinematics(self.theta_rest)
            pts = []
            tags = []
            for i, link in enumerate(self.links):
                if link.mesh is None:
                    continue
                v = link.mesh.vertices
                world = v @ T[i, :3, :3].T + T[i, :3, 3]
                pts.append(world)
                tags.append(np.full(len(v), i, dtype=np.int64))
            if not pts:
                raise HandError("hand has no link meshes")
            self._rest_points = (np.vstack(pts), np.concatenate(tags))
        return self._rest_points

    def rest_bbox_diagonal(self):
        """Diagonal of the rest-pose bounding box over all link meshes."""
        points, _ = self.rest_world_vertices()
        return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))


def load_hand(path):
    """Read an ArticulatedHand from a URDF-subset file.

    Supported: links with collision/visual mesh file references,
    revolute/prismatic/fixed joints with origins, axes and limits. Mimic
    joints and transmissions are rejected rather than silently ignored;
    mesh paths resolve relative to the description file.
    """
    if not os.path.exists(path):
        raise HandError(f"hand description not found: {path}")
    try:
        tree = ET.parse(path)
    except ET.ParseError as exc:
        raise HandError(f"cannot parse hand description {path}: {exc}") from exc
    robot = tree.getroot()
    if robot.tag != "robot":
        raise HandError(f"{path}: root element is {robot.tag!r}, not 'robot'")
    if robot.find("transmission") is not None:
        raise HandError("transmissions are not supported")

    base = os.path.dirname(os.path.abspath(path))
    links = []
    for el in robot.findall("link"):
        name = el.get("name")
        if not name:
            raise HandError("link without a name")
        mesh = None
        mesh_path = None
        geom_parent = el.find("collision")
        if geom_parent is None:
            geom_parent = el.find("visual")
        if geom_parent is not None:
            mesh_el = geom_parent.find("geometry/mesh")
            if mesh_el is None:
                raise HandError(
                    f"link {name}: only mesh geometry is supported"
                )
            fname = mesh_el.get("filename")
            if not fname:
                raise HandError(f"link {name}: mesh without filename")
            mesh_path = fname if os.path.isabs(fname) else os.path.join(
                base, fname)
            if not os.path.exists(mesh_path):
                raise HandError(f"link {name}: mesh file not found: "
                                f"{mesh_path}")
            mesh = load_mesh(mesh_path)
            origin = geom_parent.find("origin")
            if origin is not None:
                T = _origin_transform(
                    _parse_vec(origin.get("xyz"), (0, 0, 0)),
                    _parse_vec(origin.get("rpy"), (0, 0, 0)),
                )
                if not np.allclose(T, np.eye(4)):
                    mesh = TriangleMesh(
                        mesh.vertices @ T[:3, :3].T + T[:3, 3], mesh.faces
                    )
        links.append(Link(name, mesh, mesh_path))

    joints = []
    for el in robot.findall("joint"):
        name = el.get("name") or f"joint{len(joints)}"
        jtype = el.get("type")
        if el.find("mimic") is not None:
            raise HandError(f"joint {name}: mimic joints are not supported")
        if jtype not in ("revolute", "prismatic", "fixed"):
            raise HandError(f"joint {name}: unsupported joint type {jtype!r}")
        parent_el = el.find("parent")
        child_el = el.find("child")
        if parent_el is None or child_el is None:
            raise HandError(f"joint {name}: missing parent or child link")
        origin_el = el.find("origin")
        xyz = _parse_vec(origin_el.get("xyz") if origin_el is not None
                         else None, (0, 0, 0))
        rpy = _parse_vec(origin_el.get("rpy") if origin_el is not None
                         else None, (0, 0, 0))
        axis_el = el.find("axis")
        axis = _parse_vec(axis_el.get("xyz") if axis_el is not None else None,
                          (1, 0, 0))
        lower = upper = 0.0
        if jtype != "fixed":
            limit_el = el.find("limit")
            if limit_el is None or limit_el.get("lower") is None \
                    or limit_el.get("upper") is None:
                raise HandError(f"joint {name}: missing limit lower/upper")
            lower = float(limit_el.get("lower"))
            upper = float(limit_el.get("upper"))
        joints.append(Joint(name, jtype, parent_el.get("link"),
                            child_el.get("link"),
                            _origin_transform(xyz, rpy), axis, lower, upper))

    return ArticulatedHand(links, joints,
                           name=robot.get("name") or "hand")


class SkinBinding:
    """Per-skin-vertex assignment to the nearest link within ``eps``.

    Bound vertices store their rest position and normal in the bound
    link's frame so any pose can reproduce them rigidly; unbound vertices
    keep link id -1 and only their rest distance (for audits).
    """

    def __init__(self, skin, link_ids, local_points, local_normals,
                 rest_distance, eps):
        self.skin = skin
        self.link_ids = np.asarray(link_ids, dtype=np.int64)
        self.local_points = np.asarray(local_points, dtype=np.float64)
        self.local_normals = np.asarray(local_normals, dtype=np.float64)
        self.rest_distance = np.asarray(rest_distance, dtype=np.float64)
        self.eps = float(eps)
        n = skin.n_vertices
        if not (len(self.link_ids) == n == len(self.local_points)
                == len(self.local_normals) == len(self.rest_distance)):
            raise HandError("binding arrays must cover every skin vertex")

    def __len__(self):
        return len(self.link_ids)

    @property
    def bound_mask(self):
        return self.link_ids >= 0

    def bound_vertices(self):
        return np.nonzero(self.link_ids >= 0)[0]

    def is_bound(self, vertex):
        return bool(self.link_ids[int(vertex)] >= 0)


def bind_skin(hand, skin, eps=None):
    """Project skin vertices onto link geometry and bind those within eps.

    Each skin vertex takes the link owning its exact nearest articulated
    vertex (ties to the lowest link id, then lowest vertex order). The
    default eps is 2% of the hand's rest bounding-box diagonal: wide
    enough to keep fingertip skin bound, tight enough to drop webbing
    stretched between distant links.
    """
    if eps is None:
        eps = DEFAULT_EPS_FRACTION * hand.rest_bbox_diagonal()
    eps = float(eps)
    if eps <= 0:
        raise HandError("eps must be positive")

    points, tags = hand.rest_world_vertices()
    index = SpatialIndex(points)
    T = hand.forward_kinematics(hand.theta_rest)

    n = skin.n_vertices
    link_ids = np.full(n, -1, dtype=np.int64)
    local_points = np.zeros((n, 3))
    local_normals = np.zeros((n, 3))
    rest_distance = np.empty(n)

    for v in range(n):
        pos, dist = index.nearest(skin.vertices[v])
        rest_distance[v] = dist
        if dist <= eps:
            link = int(tags[pos])
            link_ids[v] = link
            R = T[link, :3, :3]
            t = T[link, :3, 3]
            local_points[v] = R.T @ (skin.vertices[v] - t)
            local_normals[v] = R.T @ skin.vertex_normals[v]
    return SkinBinding(skin, link_ids, local_points, local_normals,
                       rest_distance, eps)


def apply_link_transforms(binding, transforms, vertices):
    """World positions and normals of bound vertices under given link FK."""
    vertices = np.atleast_1d(np.asarray(vertices, dtype=np.int64))
    ids = binding.link_ids[vertices]
    if np.any(ids < 0):
        bad = int(vertices[np.nonzero(ids < 0)[0][0]])
        raise HandError(
            f"skin vertex {bad} is unbound (rest distance "
            f"{binding.rest_distance[bad]:.4g} > eps {binding.eps:.4g})"
        )
    pts = np.empty((len(vertices), 3))
    nrm = np.empty((len(vertices), 3))
    for link in np.unique(ids):
        mask = ids == link
        R = transforms[link, :3, :3]
        t = transforms[link, :3, 3]
        pts[mask] = binding.local_points[vertices[mask]] @ R.T + t
        nrm[mask] = binding.local_normals[vertices[mask]] @ R.T
    return pts, nrm


def skin_points_and_normals(binding, hand, theta, vertices=None):
    """Batched rigid skinning: one FK pass, then per-link transforms."""
    if vertices is None:
        vertices = binding.bound_vertices()
    return apply_link_transforms(binding, hand.forward_kinematics(theta),
                                 vertices)


def skin_point_and_normal(binding, hand, theta, vertex):
    """World position and normal of one bound skin vertex at ``theta``."""
    pts, nrm = skin_points_and_normals(binding, hand, theta, [int(vertex)])
    return pts[0], nrm[0]
