"""Damped least-squares fitting engine.

One engine serves every nonlinear fit in the toolkit: damped least squares
with trust-region updates (scipy's TRF implementation), analytic Jacobians
where the model provides them, and a uniform result record with
Jacobian-based one-sigma uncertainties.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares


class FitError(RuntimeError):
    """Fit could not produce a trustworthy result.

    ``diagnostics`` carries whatever is known at failure time (best
    parameters so far, cost, iteration count, reason).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateFitWarning(UserWarning):
    """Model converged but the result is structurally degenerate."""


@dataclass
class FitResult:
    """Parameter estimates with 1-sigma uncertainties from one fit.

    ``residual_norm`` is the Euclidean norm of the weighted residuals
    (sqrt(chi^2) when per-point sigmas were given).  ``sigmas`` come from
    the Jacobian at the solution: cov = (J^T J)^-1, scaled by the reduced
    chi^2 when no data sigmas were supplied.
    """

    model: str
    params: dict[str, float]
    sigmas: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def sigma(self, name: str) -> float:
        return self.sigmas[name]

    @property
    def chi2(self) -> float:
        return self.residual_norm**2

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": {k: {"value": v, "sigma": self.sigmas.get(k)} for k, v in self.params.items()},
            "residual_norm": self.residual_norm,
            "chi2": self.chi2,
            "converged": self.converged,
            "iterations": self.iterations,
            "diagnostics": {k: v for k, v in self.diagnostics.items() if _jsonable(v)},
        }


def _jsonable(v) -> bool:
    return isinstance(v, (str, int, float, bool, type(None), list, dict))


def covariance_from_jacobian(jac: np.ndarray, scale: float = 1.0) -> tuple[np.ndarray, float]:
    """(covariance, condition number) from a weighted Jacobian via SVD.

    Singular directions get pseudo-inverted with a relative cutoff, which
    surfaces near-degenerate parameter combinations as very large (but
    finite) uncertainties instead of a crash.
    """
    _, s, vt = np.linalg.svd(jac, full_matrices=False)
    if s[0] == 0.0:
        raise FitError("Jacobian is identically zero", {"singular_values": s.tolist()})
    cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
    cutoff = s[0] * 1e-14
    s_inv2 = np.where(s > cutoff, 1.0 / np.maximum(s, cutoff) ** 2, 1.0 / cutoff**2)
    cov = (vt.T * s_inv2) @ vt * scale
    return cov, cond


def lm_fit(
    model,
    x,
    y,
    p0,
    sigma=None,
    bounds=None,
    jac=None,
    names: list[str] | None = None,
    model_id: str = "custom",
    max_nfev: int | None = None,
) -> FitResult:
    """Least-squares fit of ``model(x, *p)`` to ``y``.

    Parameters
    ----------
    model : callable
        ``model(x, *params) -> ndarray`` of predictions.  ``x`` is passed
        through untouched, so it may be any structure the model understands.
    x, y : array_like
        Abscissa (opaque to the engine) and data values.
    p0 : sequence of float
        Initial parameter values; must satisfy ``bounds``.
    sigma : array_like, optional
        Per-point 1-sigma uncertainties.  When given, uncertainties are
        absolute; when omitted, the covariance is scaled by the reduced
        chi^2 of the solution.
    bounds : (lo, hi), optional
        Box bounds per parameter (use +-inf for unbounded).
    jac : callable, optional
        ``jac(x, *params) -> (n_points, n_params)`` analytic Jacobian of the
        model.  Finite differences are used when omitted.
    names : list of str, optional
        Parameter names for the result record (defaults to p0..pN).

    Raises
    ------
    FitError
        On precondition violations, iteration exhaustion or a singular
        Jacobian; diagnostics carry the best parameters found so far.
    """
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    y = np.asarray(y, dtype=float)
    n_par = p0.size
    if y.size <= n_par:
        raise FitError(f"need more data points ({y.size}) than parameters ({n_par})")
    if names is None:
        names = [f"p{i}" for i in range(n_par)]
    if len(names) != n_par:
        raise FitError("names/parameter count mismatch")

    if bounds is None:
        lo = np.full(n_par, -np.inf)
        hi = np.full(n_par, np.inf)
    else:
        lo = np.asarray(bounds[0], dtype=float) * np.ones(n_par)
        hi = np.asarray(bounds[1], dtype=float) * np.ones(n_par)
    if np.any(p0 < lo) or np.any(p0 > hi):
        raise FitError("initial guess lies outside the bounds")

    if sigma is not None:
        sig_arr = np.asarray(sigma, dtype=float)
        if np.any(~np.isfinite(sig_arr)) or np.any(sig_arr <= 0):
            raise FitError("sigma values must be positive and finite")
        w = 1.0 / sig_arr
    else:
        w = None

    def residual(p):
        r = model(x, *p) - y
        return r * w if w is not None else r

    if jac is not None:

        def jac_wrapped(p):
            j = np.asarray(jac(x, *p), dtype=float)
            return j * w[:, None] if w is not None else j

        jac_arg = jac_wrapped
    else:
        jac_arg = "2-point"

    res = least_squares(
        residual,
        p0,
        jac=jac_arg,
        bounds=(lo, hi),
        method="trf",
        xtol=1e-13,
        ftol=1e-13,
        gtol=1e-13,
        max_nfev=max_nfev if max_nfev is not None else 5000,
    )

    zero_residual = np.sqrt(2.0 * res.cost / y.size) < 1e-8
    if res.status == 0 and not zero_residual:
        # a numerically zero residual with iterations left over is not a
        # failure: noiseless data can leave a flat parameter ridge (e.g. an
        # IRF width below the data resolution) that no tolerance terminates
        raise FitError(
            "maximum number of function evaluations exhausted",
            {
                "best_params": dict(zip(names, res.x.tolist())),
                "cost": float(res.cost),
                "nfev": int(res.nfev),
            },
        )

    # one Gauss-Newton polish step: exact for linear models, and sharpens
    # the trust-region endpoint to machine precision near any minimum
    x_best, cost_best = res.x, res.cost
    try:
        step, *_ = np.linalg.lstsq(res.jac, -res.fun, rcond=None)
        cand = np.clip(res.x + step, lo, hi)
        r_cand = residual(cand)
        if np.all(np.isfinite(r_cand)):
            cost_cand = 0.5 * r_cand @ r_cand
            # a tiny step near convergence may improve the cost by less
            # than float resolution; accept it anyway (the linearized cost
            # never increases, and curvature error is O(step^2))
            tiny = np.linalg.norm(step) <= 1e-6 * (1.0 + np.linalg.norm(res.x))
            if cost_cand < cost_best or (tiny and cost_cand <= cost_best * (1 + 1e-12)):
                x_best, cost_best = cand, cost_cand
    except np.linalg.LinAlgError:
        pass

    m = y.size
    if sigma is None:
        dof = max(m - n_par, 1)
        scale = 2.0 * cost_best / dof
    else:
        scale = 1.0
    cov, cond = covariance_from_jacobian(res.jac, scale)
    sig = np.sqrt(np.maximum(np.diag(cov), 0.0))

    return FitResult(
        model=model_id,
        params=dict(zip(names, x_best.tolist())),
        sigmas=dict(zip(names, sig.tolist())),
        residual_norm=float(np.sqrt(2.0 * cost_best)),
        converged=True,
        iterations=int(res.nfev),
        diagnostics={
            "status": int(res.status),
            "message": res.message,
            "jacobian_condition": cond,
            "covariance": cov.tolist(),
            **({"zero_residual_termination": True} if res.status == 0 else {}),
        },
    )
