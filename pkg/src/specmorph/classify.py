"""Binary classifiers emitting bona fide posteriors.

Two models back the detector:
  * an L2-regularized logistic regression per facial region, solved by
    damped Newton iterations from a zero start,
  * a soft-margin RBF-kernel SVM for the global stream, solved in the dual
    with SMO-style pairwise updates, with a sigmoid (Platt) calibration
    fitted on a held-out stratified split so its decision values become
    probabilities.

Every emitted probability is clamped to [PROB_EPS, 1 - PROB_EPS] so the
downstream log-potentials stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    InvalidInputError,
    SingleClassError,
)

PROB_EPS = 1e-12

DEFAULT_L2 = 1e-2
LOGISTIC_TOL = 1e-6
LOGISTIC_MAX_ITER = 10_000

DEFAULT_PENALTY = 1.0
SVM_TOL = 1e-4
SVM_MAX_ITER = 500_000
CALIBRATION_FRACTION = 0.2


def clamp_probability(p):
    """Clamp into [PROB_EPS, 1 - PROB_EPS]; accepts scalars or arrays."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_labeled(features: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2:
        raise InvalidInputError(f"features must be 2-D, got shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise DimensionMismatchError(f"labels shape {y.shape} != ({x.shape[0]},)")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("features contain non-finite values")
    if not np.all(np.isin(y, (0, 1))):
        raise InvalidInputError("labels must be 0 (morph) or 1 (bona fide)")
    if len(np.unique(y)) < 2:
        raise SingleClassError("both classes must be present")
    return x, y.astype(np.float64)


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2_strength: float


def logistic_objective(weights: np.ndarray, bias: float, features: np.ndarray,
                       targets: np.ndarray, l2_strength: float):
    """Penalized negative log-likelihood with its gradient.

    Targets may be soft (in [0, 1]).  The L2 penalty applies to the
    weights only, never the bias.  Returns (value, grad_weights, grad_bias).
    """
    z = features @ weights + bias
    # log(1 + e^z) - t*z, evaluated stably
    value = float(np.sum(np.logaddexp(0.0, z) - targets * z))
    value += 0.5 * l2_strength * float(weights @ weights)
    p = sigmoid(z)
    diff = p - targets
    grad_w = features.T @ diff + l2_strength * weights
    grad_b = float(np.sum(diff))
    return value, grad_w, grad_b


def _newton_logistic(features: np.ndarray, targets: np.ndarray, l2_strength: float,
                     tol: float, max_iter: int,
                     history: list | None = None) -> tuple[np.ndarray, float]:
    """Damped Newton from zero init; monotone via Armijo backtracking."""
    n, d = features.shape
    w = np.zeros(d)
    b = 0.0
    value, grad_w, grad_b = logistic_objective(w, b, features, targets, l2_strength)
    if history is not None:
        history.append(value)
    for _ in range(max_iter):
        grad = np.concatenate([grad_w, [grad_b]])
        if np.linalg.norm(grad) < tol:
            return w, b
        z = features @ w + b
        p = sigmoid(z)
        s = np.maximum(p * (1.0 - p), 1e-12)
        aug = np.column_stack([features, np.ones(n)])
        hess = (aug * s[:, None]).T @ aug
        hess[np.arange(d), np.arange(d)] += l2_strength
        hess[np.arange(d + 1), np.arange(d + 1)] += 1e-12
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = -grad
        # Armijo sufficient decrease; Newton direction is a descent direction
        slope = float(grad @ step)
        if slope >= 0:
            step = -grad
            slope = -float(grad @ grad)
        t = 1.0
        for _ in range(60):
            w_new = w + t * step[:d]
            b_new = b + t * step[d]
            new_value, new_gw, new_gb = logistic_objective(
                w_new, b_new, features, targets, l2_strength)
            if new_value <= value + 1e-4 * t * slope:
                break
            t *= 0.5
        w, b = w_new, b_new
        value, grad_w, grad_b = new_value, new_gw, new_gb
        if history is not None:
            history.append(value)
    # stopping rule is tolerance OR iteration cap; the cap is a valid stop
    return w, b


def train_logistic(features: np.ndarray, labels: np.ndarray,
                   l2_strength: float = DEFAULT_L2, tol: float = LOGISTIC_TOL,
                   max_iter: int = LOGISTIC_MAX_ITER,
                   history: list | None = None) -> LogisticModel:
    """Fit the regularized logistic model; deterministic from zero init."""
    x, y = _check_labeled(features, labels)
    w, b = _newton_logistic(x, y, l2_strength, tol, max_iter, history)
    return LogisticModel(weights=w, bias=float(b), l2_strength=l2_strength)


def predict_logistic(model: LogisticModel, features: np.ndarray) -> np.ndarray | float:
    """Bona fide posterior sigmoid(w.x + b), clamped away from {0, 1}."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != len(model.weights):
        raise DimensionMismatchError(
            f"feature length {x.shape[-1]} != model dimension {len(model.weights)}"
        )
    p = clamp_probability(sigmoid(np.atleast_2d(x) @ model.weights + model.bias))
    return float(p[0]) if x.ndim == 1 else p


# ---------------------------------------------------------------------------
# RBF-kernel SVM (dual SMO) + sigmoid calibration
# ---------------------------------------------------------------------------

def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def gamma_heuristic(features: np.ndarray) -> float:
    """gamma = 1 / (d * mean per-feature variance), guarding zero variance."""
    x = np.asarray(features, dtype=np.float64)
    mean_var = float(np.mean(x.var(axis=0)))
    d = x.shape[1]
    if mean_var <= 0:
        return 1.0 / d
    return 1.0 / (d * mean_var)


def fit_svm_dual(features: np.ndarray, signs: np.ndarray, penalty: float,
                 gamma: float, tol: float = SVM_TOL,
                 max_iter: int = SVM_MAX_ITER) -> tuple[np.ndarray, float]:
    """Solve the soft-margin dual with SMO pairwise updates.

    `signs` are +/-1 labels.  Returns (alpha, bias); at exit the maximal
    KKT violation is below `tol`, 0 <= alpha <= penalty and
    sum(alpha * signs) == 0 up to accumulated rounding.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(signs, dtype=np.float64)
    n = len(y)
    if n < 2 or not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidInputError("dual solver needs >= 2 samples with +/-1 labels")
    if len(np.unique(y)) < 2:
        raise SingleClassError("both classes must be present")
    kernel = rbf_kernel(x, x, gamma)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a) at a = 0
    minus_yg = np.empty(n)
    for iteration in range(max_iter):
        np.multiply(y, grad, out=minus_yg)
        np.negative(minus_yg, out=minus_yg)
        up = ((y > 0) & (alpha < penalty)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < penalty)) | ((y > 0) & (alpha > 0))
        up_vals = np.where(up, minus_yg, -np.inf)
        low_vals = np.where(low, minus_yg, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        if up_vals[i] - low_vals[j] <= tol:
            break
        # two-variable subproblem with the equality constraint preserved
        err_i = y[i] * grad[i]
        err_j = y[j] * grad[j]
        eta = max(kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j], 1e-12)
        if y[i] != y[j]:
            lo = max(0.0, alpha[j] - alpha[i])
            hi = min(penalty, penalty + alpha[j] - alpha[i])
        else:
            lo = max(0.0, alpha[i] + alpha[j] - penalty)
            hi = min(penalty, alpha[i] + alpha[j])
        aj_new = np.clip(alpha[j] + y[j] * (err_i - err_j) / eta, lo, hi)
        ai_new = alpha[i] + y[i] * y[j] * (alpha[j] - aj_new)
        # snap bound-touching values exactly onto the box so rounding dust
        # cannot keep a pinned variable in the working set forever
        if ai_new < 1e-12:
            ai_new = 0.0
        elif ai_new > penalty - 1e-12:
            ai_new = penalty
        if aj_new < 1e-12:
            aj_new = 0.0
        elif aj_new > penalty - 1e-12:
            aj_new = penalty
        delta_i = (ai_new - alpha[i]) * y[i]
        delta_j = (aj_new - alpha[j]) * y[j]
        grad += y * (kernel[:, i] * delta_i + kernel[:, j] * delta_j)
        alpha[i] = ai_new
        alpha[j] = aj_new
    else:
        raise ConvergenceError(f"SMO did not converge within {max_iter} iterations")
    free = (alpha > 1e-12) & (alpha < penalty - 1e-12)
    if np.any(free):
        bias = float(np.mean(-y[free] * grad[free]))
    else:
        bias = float((up_vals[i] + low_vals[j]) / 2.0)
    return alpha, bias


@dataclass(frozen=True)
class KernelSvmModel:
    support_features: np.ndarray    # (m, d)
    dual_coefficients: np.ndarray   # (m,) alpha_i * y_i, |.| <= penalty
    bias: float
    kernel_width: float             # RBF gamma
    penalty: float                  # box constraint C
    calibration_slope: float        # sigmoid slope on decision values
    calibration_offset: float
    calibration_seed: int


def svm_decision(model: KernelSvmModel, features: np.ndarray) -> np.ndarray | float:
    x = np.asarray(features, dtype=np.float64)
    if x.shape[-1] != model.support_features.shape[1]:
        raise DimensionMismatchError(
            f"feature length {x.shape[-1]} != model dimension "
            f"{model.support_features.shape[1]}"
        )
    k = rbf_kernel(np.atleast_2d(x), model.support_features, model.kernel_width)
    dec = k @ model.dual_coefficients + model.bias
    return float(dec[0]) if x.ndim == 1 else dec


def fit_sigmoid_calibration(decisions: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Fit p = sigmoid(A*decision + B) with interior target smoothing.

    The positive/negative targets are (n+ + 1)/(n+ + 2) and 1/(n- + 2),
    which keeps the optimum finite even for perfectly separated decisions.
    """
    dec = np.asarray(decisions, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("calibration split lost one of the classes")
    targets = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    w, b = _newton_logistic(dec[:, None], targets, 0.0, 1e-8, 500)
    return float(w[0]), float(b)


def train_svm_rbf(features: np.ndarray, labels: np.ndarray,
                  penalty: float = DEFAULT_PENALTY, gamma: float | None = None,
                  tol: float = SVM_TOL, seed: int = 0,
                  calibration_fraction: float = CALIBRATION_FRACTION,
                  max_iter: int = SVM_MAX_ITER) -> KernelSvmModel:
    """Train the calibrated global classifier.

    A stratified, seeded `calibration_fraction` of the data is held out;
    the SVM dual is solved on the remainder and the sigmoid calibration is
    fitted on the held-out decision values.
    """
    x, y = _check_labeled(features, labels)
    n = len(y)
    if n < 10:
        raise InvalidInputError(f"need >= 10 samples to hold out a calibration split, got {n}")
    if gamma is None:
        gamma = gamma_heuristic(x)
    if gamma <= 0 or penalty <= 0:
        raise InvalidInputError("gamma and penalty must be positive")
    rng = np.random.default_rng(seed)
    cal_idx: list[int] = []
    fit_idx: list[int] = []
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if len(members) < 2:
            raise SingleClassError(f"class {cls} needs >= 2 samples for the split")
        perm = rng.permutation(len(members))
        n_cal = max(1, int(round(calibration_fraction * len(members))))
        n_cal = min(n_cal, len(members) - 1)
        cal_idx.extend(members[perm[:n_cal]])
        fit_idx.extend(members[perm[n_cal:]])
    cal_idx = sorted(cal_idx)
    fit_idx = sorted(fit_idx)
    signs = np.where(y[fit_idx] == 1, 1.0, -1.0)
    alpha, bias = fit_svm_dual(x[fit_idx], signs, penalty, gamma, tol, max_iter)
    sv = alpha > 1e-12
    model = KernelSvmModel(
        support_features=x[fit_idx][sv],
        dual_coefficients=(alpha * signs)[sv],
        bias=bias,
        kernel_width=float(gamma),
        penalty=float(penalty),
        calibration_slope=1.0,
        calibration_offset=0.0,
        calibration_seed=seed,
    )
    slope, offset = fit_sigmoid_calibration(svm_decision(model, x[cal_idx]), y[cal_idx])
    return KernelSvmModel(
        support_features=model.support_features,
        dual_coefficients=model.dual_coefficients,
        bias=model.bias,
        kernel_width=model.kernel_width,
        penalty=model.penalty,
        calibration_slope=slope,
        calibration_offset=offset,
        calibration_seed=seed,
    )


def predict_svm(model: KernelSvmModel, features: np.ndarray) -> np.ndarray | float:
    """Calibrated bona fide probability sigmoid(A*decision + B), clamped."""
    dec = svm_decision(model, features)
    z = model.calibration_slope * np.asarray(dec) + model.calibration_offset
    p = clamp_probability(sigmoid(np.atleast_1d(z)))
    return float(p[0]) if np.isscalar(dec) else p
