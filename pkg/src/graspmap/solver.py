"""Bound-constrained pose solver with capped calls and prior evolution.

A session wraps one PoseProblem and runs repeated "calls" of at most
``iteration_cap`` iterations (default 1,000). Before each call the pose
prior is set: to a user-supplied override if given, otherwise to the best
pose of the previous call (the rest pose on the first call). Two backends
are provided: a moving-asymptotes separable approximation ("mma") and a
projected quasi-Newton method ("lbfgsb"); both clamp every iterate to the
box and report the best-so-far pose, which never worsens.
"""

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

DEFAULT_ITERATION_CAP = 1000
DEFAULT_REL_TOL = 1e-8
DEFAULT_REL_WINDOW = 10
DEFAULT_STEP_TOL = 1e-10

ASY_INIT = 0.5
ASY_INCR = 1.2
ASY_DECR = 0.7
ASY_MIN_FRACTION = 0.01
ASY_MAX_FRACTION = 10.0


class SolverError(RuntimeError):
    """Raised when a call cannot start or a backend fails."""


class CallRecord:
    """Outcome of one solve call, kept in the session history."""

    def __init__(self, call_index, backend, theta_prior):
        self.call_index = int(call_index)
        self.backend = str(backend)
        self.theta_prior = np.array(theta_prior, dtype=np.float64)
        self.iterations = 0
        self.best_value = np.inf
        self.theta_star = None
        self.converged = False
        self.error = None
        self.trace = []  # (iteration, best value) pairs

    def to_json_dict(self):
        return {
            "call": self.call_index,
            "backend": self.backend,
            "iterations": self.iterations,
            "best_value": float(self.best_value),
            "converged": self.converged,
            "error": self.error,
            "theta_prior": [float(x) for x in self.theta_prior],
            "theta_star": None if self.theta_star is None
            else [float(x) for x in self.theta_star],
            "trace": [[int(i), float(v)] for i, v in self.trace],
        }


class _BestTracker:
    """Monotone best-so-far bookkeeping shared by the backends.

    Seeding with the session's incumbent makes the recorded best exactly
    non-increasing across calls even when re-evaluating the incumbent
    would land a rounding error away from its stored value.
    """

    def __init__(self, record, progress, best_value=np.inf, best_theta=None):
        self.record = record
        self.progress = progress
        self.best_value = best_value
        self.best_theta = None if best_theta is None else np.array(
            best_theta, dtype=np.float64)

    def offer(self, iteration, theta, value):
        if np.isfinite(value) and value < self.best_value:
            self.best_value = value
            self.best_theta = np.array(theta, dtype=np.float64)
        self.record.trace.append((iteration, float(self.best_value)))
        if self.progress is not None:
            self.progress(iteration, float(value),
                          np.array(theta, dtype=np.float64))


def _converged(values, window, rel_tol):
    if len(values) <= window:
        return False
    prev = values[-1 - window]
    cur = values[-1]
    return (prev - cur) <= rel_tol * max(abs(prev), 1.0)


def _minimize_mma(problem, x0, cap, rel_tol, window, step_tol, tracker):
    """Moving-asymptotes iteration for the box-constrained problem.

    Each step builds the separable convex approximation
    r + sum_j p_j/(U_j - x_j) + q_j/(x_j - L_j) from the gradient at the
    current iterate and minimizes it in closed form per coordinate;
    asymptotes widen on steady progress and shrink on oscillation.
    """
    lower = problem.lower
    upper = problem.upper
    span = np.maximum(upper - lower, 1e-12)
    free = (upper - lower) > 1e-15

    x = np.clip(np.asarray(x0, dtype=np.float64), lower, upper)
    xm1 = x.copy()
    xm2 = x.copy()
    low = x - ASY_INIT * span
    upp = x + ASY_INIT * span

    iterations = 0
    converged = False
    for k in range(cap):
        value, grad = problem.value_and_gradient(x)
        tracker.offer(k, x, value)
        iterations = k + 1

        # components under the finite-difference noise floor are zero to
        # the solver; this keeps stationary points exact fixpoints of the
        # update so the step tolerance can fire there
        noise = 1e-14 * max(abs(value), 1.0)
        grad = np.where(np.abs(grad) <= noise, 0.0, grad)

        if k >= 2:
            osc = (x - xm1) * (xm1 - xm2)
            gamma = np.where(osc > 0, ASY_INCR,
                             np.where(osc < 0, ASY_DECR, 1.0))
            low = x - gamma * (xm1 - low)
            upp = x + gamma * (upp - xm1)
        low = np.minimum(low, x - ASY_MIN_FRACTION * span)
        low = np.maximum(low, x - ASY_MAX_FRACTION * span)
        upp = np.maximum(upp, x + ASY_MIN_FRACTION * span)
        upp = np.minimum(upp, x + ASY_MAX_FRACTION * span)

        gp = np.maximum(grad, 0.0)
        gm = np.maximum(-grad, 0.0)
        reg = 1e-6 / span
        p = (upp - x) ** 2 * (1.001 * gp + 0.001 * gm + reg)
        q = (x - low) ** 2 * (0.001 * gp + 1.001 * gm + reg)

        sp = np.sqrt(p)
        sq = np.sqrt(q)
        xnew = (low * sp + upp * sq) / (sp + sq)
        # move limits keep the iterate strictly inside the asymptotes
        alpha = np.maximum(lower, low + 0.1 * (x - low))
        beta = np.minimum(upper, upp - 0.1 * (upp - x))
        xnew = np.clip(xnew, alpha, beta)
        xnew = np.clip(xnew, lower, upper)
        xnew[~free] = lower[~free]

        # the subproblem direction is a descent direction (the separable
        # model matches the gradient at x), so halving toward x recovers
        # an improving point when the full closed-form step overshoots;
        # without this the iterates limit-cycle at the asymptote floor
        vnew = problem.value(xnew)
        for _ in range(30):
            if np.isfinite(vnew) and vnew <= value:
                break
            xnew = 0.5 * (xnew + x)
            vnew = problem.value(xnew)

        step = np.max(np.abs(xnew - x)) if len(x) else 0.0
        xm2 = xm1
        xm1 = x
        x = xnew

        best_values = [v for _, v in tracker.record.trace]
        if step < step_tol or _converged(best_values, window, rel_tol):
            converged = True
            break

    value = problem.value(x)
    tracker.offer(iterations, x, value)
    return iterations, converged


def _minimize_lbfgsb(problem, x0, cap, rel_tol, window, step_tol, tracker):
    """Projected quasi-Newton backend on the same contract."""
    lower = problem.lower
    upper = problem.upper
    x0 = np.clip(np.asarray(x0, dtype=np.float64), lower, upper)
    state = {"it": 0}

    def fun(x):
        x = np.clip(x, lower, upper)
        return problem.value_and_gradient(x)

    def callback(xk):
        xk = np.clip(xk, lower, upper)
        state["it"] += 1
        tracker.offer(state["it"], xk, problem.value(xk))

    tracker.offer(0, x0, problem.value(x0))
    res = _scipy_minimize(
        fun, x0, jac=True, method="L-BFGS-B",
        bounds=list(zip(lower, upper)),
        callback=callback,
        options={"maxiter": cap, "ftol": rel_tol, "gtol": 1e-12,
                 "maxcor": 20},
    )
    xf = np.clip(res.x, lower, upper)
    tracker.offer(state["it"] + 1, xf, problem.value(xf))
    iterations = max(int(res.nit), 1)
    return iterations, bool(res.success)


_BACKENDS = {
    "mma": _minimize_mma,
    "lbfgsb": _minimize_lbfgsb,
}


def available_backends():
    return sorted(_BACKENDS)


class SolveSession:
    """Stateful call loop over one problem: theta*, prior policy, history."""

    def __init__(self, problem, backend="mma",
                 iteration_cap=DEFAULT_ITERATION_CAP,
                 rel_tol=DEFAULT_REL_TOL, rel_window=DEFAULT_REL_WINDOW,
                 step_tol=DEFAULT_STEP_TOL, warm_start=None):
        if backend not in _BACKENDS:
            raise SolverError(
                f"unknown backend {backend!r}; choose from "
                f"{available_backends()}"
            )
        if iteration_cap < 1:
            raise SolverError("iteration cap must be at least 1")
        self.problem = problem
        self.backend = backend
        self.iteration_cap = int(iteration_cap)
        self.rel_tol = float(rel_tol)
        self.rel_window = int(rel_window)
        self.step_tol = float(step_tol)
        # a warm start stands in for "the previous call's best": the first
        # call then starts and anchors its prior there instead of at rest
        self.theta_star = (None if warm_start is None
                           else np.array(warm_start, dtype=np.float64))
        self.best_value = np.inf
        self.history = []

    @property
    def calls(self):
        return len([r for r in self.history if r.error is None])

    def solve_call(self, prior_override=None, progress=None,
                   iteration_cap=None):
        """Run one capped optimization call and update theta*.

        The prior is set before iterating: to ``prior_override`` when the
        user supplies an edited pose, otherwise to the previous call's
        theta* (the rest pose on the very first call).
        """
        hand = self.problem.hand
        if prior_override is not None:
            prior = np.asarray(prior_override, dtype=np.float64)
        elif self.theta_star is not None:
            prior = self.theta_star
        else:
            prior = hand.theta_rest
        self.problem.set_prior(prior)

        theta0 = (hand.theta_rest if self.theta_star is None
                  else self.theta_star)
        theta0 = np.clip(theta0, self.problem.lower, self.problem.upper)

        record = CallRecord(len(self.history), self.backend,
                            self.problem.theta_prior)
        try:
            v0 = self.problem.value(theta0)
        except Exception as exc:  # noqa: BLE001 - session must survive
            record.error = f"objective failed at the starting pose: {exc}"
            self.history.append(record)
            raise SolverError(record.error) from exc
        if not np.isfinite(v0):
            record.error = f"objective non-finite at the starting pose: {v0}"
            self.history.append(record)
            raise SolverError(record.error)

        tracker = _BestTracker(record, progress, self.best_value,
                               self.theta_star)
        cap = self.iteration_cap if iteration_cap is None else int(
            iteration_cap)
        try:
            iterations, converged = _BACKENDS[self.backend](
                self.problem, theta0, cap, self.rel_tol, self.rel_window,
                self.step_tol, tracker)
        except Exception as exc:  # noqa: BLE001 - session must survive
            record.error = f"backend {self.backend} failed: {exc}"
            self.history.append(record)
            raise SolverError(record.error) from exc

        # one canonical theta* everywhere: the recentered representation
        # goes into the record, the session state, and the next prior
        theta_star = hand.recenter_root_rotation(tracker.best_theta)
        record.iterations = iterations
        record.converged = converged
        record.best_value = float(tracker.best_value)
        record.theta_star = np.array(theta_star, dtype=np.float64)
        self.history.append(record)
        self.best_value = float(tracker.best_value)
        self.theta_star = theta_star
        return record

    def run_to_acceptance(self, max_calls, value_threshold,
                          progress=None, iteration_cap=None):
        """Repeat solve calls until the value drops to the threshold."""
        if max_calls < 1:
            raise SolverError("max_calls must be at least 1")
        for _ in range(int(max_calls)):
            self.solve_call(progress=progress, iteration_cap=iteration_cap)
            if self.best_value <= value_threshold:
                break
        return self

    def to_json_dict(self):
        return {
            "backend": self.backend,
            "iteration_cap": self.iteration_cap,
            "best_value": (None if not np.isfinite(self.best_value)
                           else float(self.best_value)),
            "theta_star": None if self.theta_star is None
            else [float(x) for x in self.theta_star],
            "history": [r.to_json_dict() for r in self.history],
        }
