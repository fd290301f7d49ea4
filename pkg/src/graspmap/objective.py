"""Three-term grasp objective: contact distance, normal alignment, prior.

For M correspondence pairs (object point + normal vs bound skin vertex)
and a J-DOF hand, the value at pose theta is

    sum_i (lambda_d * ||p_o,i - p_h,i(theta)||^2
           + lambda_n * (1 + n_h,i(theta) . n_o,i)^2)
    + lambda_p * ||theta - theta_prior||^2

There is deliberately no collision term. Gradients of the pair terms come
from central finite differences (one kinematics pass per perturbed pose);
the prior gradient is analytic.
"""

import warnings

import numpy as np

from .hand import apply_link_transforms

FD_STEP_ANGLE = 1e-5
FD_STEP_TRANSLATION_FRACTION = 1e-5
DEFAULT_LAMBDA_D = 1.0
DEFAULT_LAMBDA_N_FRACTION = 0.05
DEFAULT_LAMBDA_P_FRACTION = 0.001
TRANSLATION_BOX_MARGIN = 2.0


class ObjectiveError(ValueError):
    """Raised for malformed problems or non-finite evaluations."""


def gamma_p(theta, theta_prior):
    """Squared deviation from the pose prior, summed over DOFs."""
    d = np.asarray(theta, dtype=np.float64) - np.asarray(theta_prior,
                                                         dtype=np.float64)
    if d.shape != np.shape(theta):
        raise ObjectiveError("theta and prior dimensions differ")
    return float(d @ d)


class PoseProblem:
    """One Eq.-style pose optimization instance.

    Pairs whose skin vertex is unbound are dropped (with a warning) before
    anything else; at least one usable pair must remain. Weights default
    to a commensurate scaling by the hand's rest bounding-box diagonal:
    lambda_d = 1, lambda_n = 0.05 * diag^2, lambda_p = 0.001 * diag^2 / J.
    """

    def __init__(self, hand, binding, object_points, object_normals,
                 skin_vertices, lambda_d=None, lambda_n=None, lambda_p=None,
                 theta_prior=None, lower=None, upper=None):
        self.hand = hand
        self.binding = binding

        object_points = np.atleast_2d(np.asarray(object_points,
                                                 dtype=np.float64))
        object_normals = np.atleast_2d(np.asarray(object_normals,
                                                  dtype=np.float64))
        skin_vertices = np.atleast_1d(np.asarray(skin_vertices,
                                                 dtype=np.int64))
        if not (len(object_points) == len(object_normals)
                == len(skin_vertices)):
            raise ObjectiveError("pair arrays must have equal length")
        if not np.isfinite(object_points).all():
            raise ObjectiveError("object points must be finite")

        norms = np.linalg.norm(object_normals, axis=1)
        if np.any(~np.isfinite(norms)) or np.any(norms < 1e-12):
            bad = int(np.nonzero(~np.isfinite(norms) | (norms < 1e-12))[0][0])
            raise ObjectiveError(f"pair {bad}: degenerate object normal")
        object_normals = object_normals / norms[:, None]

        usable = binding.bound_mask[skin_vertices]
        if not usable.all():
            dropped = int(np.count_nonzero(~usable))
            warnings.warn(
                f"{dropped} of {len(usable)} pairs reference unbound skin "
                "vertices and were dropped",
                UserWarning,
                stacklevel=2,
            )
        self.object_points = object_points[usable]
        self.object_normals = object_normals[usable]
        self.skin_vertices = skin_vertices[usable]
        if len(self.skin_vertices) == 0:
            raise ObjectiveError("no usable correspondence pairs remain")

        diag = hand.rest_bbox_diagonal()
        self.lambda_d = DEFAULT_LAMBDA_D if lambda_d is None else float(
            lambda_d)
        self.lambda_n = (DEFAULT_LAMBDA_N_FRACTION * diag * diag
                         if lambda_n is None else float(lambda_n))
        self.lambda_p = (DEFAULT_LAMBDA_P_FRACTION * diag * diag / hand.n_dofs
                         if lambda_p is None else float(lambda_p))
        for name, lam in (("lambda_d", self.lambda_d),
                          ("lambda_n", self.lambda_n),
                          ("lambda_p", self.lambda_p)):
            if lam < 0:
                raise ObjectiveError(f"{name} must be nonnegative")
        if self.lambda_d == self.lambda_n == self.lambda_p == 0.0:
            raise ObjectiveError("at least one weight must be positive")

        self.lower, self.upper = self._finite_bounds(lower, upper, diag)

        # finite-difference steps per DOF: radians for angles, a fraction
        # of the hand scale for translations
        self.fd_steps = np.full(hand.n_dofs, FD_STEP_ANGLE)
        self.fd_steps[hand.translational_dofs] = (
            FD_STEP_TRANSLATION_FRACTION * diag)

        self.theta_prior = None
        self.set_prior(hand.theta_rest if theta_prior is None else theta_prior)

    def _finite_bounds(self, lower, upper, diag):
        """Hand bounds with free translations shrunk to a finite box.

        Separable-approximation backends need finite boxes; the box spans
        the object points plus a two-diagonal margin on each side and
        always contains the rest pose.
        """
        lo = np.array(self.hand.theta_lower if lower is None else lower,
                      dtype=np.float64)
        hi = np.array(self.hand.theta_upper if upper is None else upper,
                      dtype=np.float64)
        if lo.shape != (self.hand.n_dofs,) or hi.shape != (self.hand.n_dofs,):
            raise ObjectiveError("bounds must cover every DOF")
        if np.any(lo > hi):
            raise ObjectiveError("lower bound exceeds upper bound")
        margin = TRANSLATION_BOX_MARGIN * max(diag, 1e-12)
        pmin = self.object_points.min(axis=0)
        pmax = self.object_points.max(axis=0)
        rest = self.hand.theta_rest
        for axis in range(3):
            if np.isneginf(lo[axis]):
                lo[axis] = min(pmin[axis] - margin, rest[axis])
            if np.isposinf(hi[axis]):
                hi[axis] = max(pmax[axis] + margin, rest[axis])
        return lo, hi

    @property
    def n_pairs(self):
        return len(self.skin_vertices)

    def set_prior(self, theta):
        """Store a prior clamped into the bounds."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.hand.n_dofs,):
            raise ObjectiveError("prior has wrong dimension")
        self.theta_prior = np.clip(theta, self.lower, self.upper)

    def _pair_terms(self, theta, transforms=None):
        if transforms is None:
            transforms = self.hand.forward_kinematics(theta)
        ph, nh = apply_link_transforms(self.binding, transforms,
                                       self.skin_vertices)
        d = self.object_points - ph
        gd = np.einsum("ij,ij->i", d, d)
        gn = (1.0 + np.einsum("ij,ij->i", nh, self.object_normals)) ** 2
        return gd, gn

    def gamma_d(self, i, theta):
        """Squared distance of pair ``i`` at pose ``theta``."""
        gd, _ = self._pair_terms(np.asarray(theta, dtype=np.float64))
        return float(gd[int(i)])

    def gamma_n(self, i, theta):
        """Squared normal mis-alignment of pair ``i``, in [0, 4]."""
        _, gn = self._pair_terms(np.asarray(theta, dtype=np.float64))
        return float(gn[int(i)])

    def _pair_value(self, theta):
        gd, gn = self._pair_terms(theta)
        value = self.lambda_d * gd.sum() + self.lambda_n * gn.sum()
        if not np.isfinite(value):
            per_pair = self.lambda_d * gd + self.lambda_n * gn
            bad = int(np.nonzero(~np.isfinite(per_pair))[0][0])
            raise ObjectiveError(
                f"pair {bad} (skin vertex {int(self.skin_vertices[bad])}) "
                "produced a non-finite value"
            )
        return value

    def value(self, theta):
        """Weighted objective at ``theta``."""
        theta = np.asarray(theta, dtype=np.float64)
        return self._pair_value(theta) + self.lambda_p * gamma_p(
            theta, self.theta_prior)

    def value_and_gradient(self, theta):
        """Objective and its gradient (central differences + analytic prior)."""
        theta = np.asarray(theta, dtype=np.float64)
        value = self.value(theta)
        grad = np.empty(self.hand.n_dofs)
        for j in range(self.hand.n_dofs):
            h = self.fd_steps[j]
            tp = theta.copy()
            tp[j] += h
            tm = theta.copy()
            tm[j] -= h
            grad[j] = (self._pair_value(tp) - self._pair_value(tm)) / (2 * h)
        grad += 2.0 * self.lambda_p * (theta - self.theta_prior)
        return value, grad

    def term_breakdown(self, theta):
        """Raw and weighted term sums, for reports and audits."""
        theta = np.asarray(theta, dtype=np.float64)
        gd, gn = self._pair_terms(theta)
        gp = gamma_p(theta, self.theta_prior)
        return {
            "gamma_d_sum": float(gd.sum()),
            "gamma_n_sum": float(gn.sum()),
            "gamma_p": float(gp),
            "weighted_distance": float(self.lambda_d * gd.sum()),
            "weighted_normal": float(self.lambda_n * gn.sum()),
            "weighted_prior": float(self.lambda_p * gp),
            "total": float(self.lambda_d * gd.sum()
                           + self.lambda_n * gn.sum() + self.lambda_p * gp),
        }

    def contact_distances(self, theta):
        """Per-pair Euclidean distance object point <-> skin point."""
        gd, _ = self._pair_terms(np.asarray(theta, dtype=np.float64))
        return np.sqrt(gd)
