"""Ridge least-squares fitting of polynomial matching matrices.

A forward transform maps an image's patch colors onto the standard patch
colors; the inverse transform is fitted separately in the opposite direction.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import scipy.linalg

from .color import ColorTransform, FeatureSpec, PatchSet, expand_features
from .errors import SingularSystem

DEFAULT_RIDGE = 1e-4
MAX_CONDITION = 1e12


def _design(source, target, spec):
    src = source.colors if isinstance(source, PatchSet) else np.asarray(source, dtype=np.float64)
    tgt = target.colors if isinstance(target, PatchSet) else np.asarray(target, dtype=np.float64)
    return expand_features(src, spec), tgt


def fit_transform(source, target, spec: FeatureSpec = FeatureSpec(),
                  ridge: float = DEFAULT_RIDGE) -> ColorTransform:
    """Minimize sum ||M phi(source_i) - target_i||^2 + ridge ||M||_F^2 over M.

    Solved through the normal equations (Phi^T Phi + ridge I) M^T = Phi^T T
    with a Cholesky factorization.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    phi, tgt = _design(source, target, spec)
    gram = phi.T @ phi + ridge * np.eye(spec.term_count)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularSystem(f"normal equations are singular (condition {cond:.3g})")
    try:
        factor = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("normal equations are not positive definite") from exc
    m_t = scipy.linalg.cho_solve(factor, phi.T @ tgt)
    return ColorTransform(m_t.T, spec)


def fit_pair(standard, image_patches, spec: FeatureSpec = FeatureSpec(),
             ridge: float = DEFAULT_RIDGE):
    """Return (forward, inverse): image -> standard and standard -> image."""
    forward = fit_transform(image_patches, standard, spec, ridge)
    inverse = fit_transform(standard, image_patches, spec, ridge)
    return forward, inverse


def fit_residual(t: ColorTransform, source, target) -> float:
    """RMSE over the 72 channel values, without output clipping."""
    phi, tgt = _design(source, target, t.feature_spec)
    err = phi @ t.matrix.T - tgt
    return float(np.sqrt(np.mean(err ** 2)))


def ridge_objective(matrix, source, target, spec: FeatureSpec, ridge: float) -> float:
    phi, tgt = _design(source, target, spec)
    matrix = np.asarray(matrix, dtype=np.float64)
    return float(np.sum((phi @ matrix.T - tgt) ** 2) + ridge * np.sum(matrix ** 2))


def gradient_descent_fit(source, target, spec: FeatureSpec = FeatureSpec(),
                         ridge: float = DEFAULT_RIDGE, tol: float = 1e-11,
                         max_iter: int = 2_000_000) -> ColorTransform:
    """Reference minimizer of the ridge objective by accelerated gradient descent.

    Uses no linear solve, so it can serve as an oracle for :func:`fit_transform`.
    Step size is 1/L with L from power iteration; momentum restarts when the
    gradient turns against the last step.
    """
    phi, tgt = _design(source, target, spec)
    k = spec.term_count

    def grad(m_t):
        return 2 * (phi.T @ (phi @ m_t - tgt) + ridge * m_t)

    v = np.ones(k)
    for _ in range(500):
        w = phi.T @ (phi @ v) + ridge * v
        v = w / np.linalg.norm(w)
    lipschitz = 2 * (v @ (phi.T @ (phi @ v)) + ridge) * 1.01
    step = 1.0 / lipschitz

    x = np.zeros((k, 3))
    y = x.copy()
    t = 1.0
    for _ in range(max_iter):
        g = grad(y)
        x_new = y - step * g
        if np.sum(g * (x_new - x)) > 0:
            # gradient-based momentum restart
            y, t = x, 1.0
            continue
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if np.max(np.abs(grad(x))) < tol:
            break
    return ColorTransform(x.T, spec)


def transform_fingerprint(t: ColorTransform) -> str:
    h = hashlib.sha256()
    h.update(f"{t.feature_spec.degree}:{int(t.feature_spec.include_bias)}:".encode())
    h.update(np.ascontiguousarray(t.matrix, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def write_transform(path, t: ColorTransform, image_id: str, direction: str,
                    ridge: float, patches: str | None = None) -> None:
    """Text cache of a transform: header fields, then 3 rows at full precision.

    ``patches`` is an optional fingerprint of the patch colors the fit came from.
    """
    lines = [
        "# illumtransfer color transform",
        f"image_id {image_id}",
        f"direction {direction}",
        f"degree {t.feature_spec.degree}",
        f"include_bias {int(t.feature_spec.include_bias)}",
        f"ridge {ridge!r}",
    ]
    if patches:
        lines.append(f"patches {patches}")
    lines += ["row " + " ".join(repr(float(v)) for v in row) for row in t.matrix]
    Path(path).write_text("\n".join(lines) + "\n")


def read_transform(path):
    """Inverse of :func:`write_transform`; returns (transform, header dict)."""
    header, rows = {}, []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        if key == "row":
            rows.append([float(v) for v in rest.split()])
        else:
            header[key] = rest.strip()
    spec = FeatureSpec(int(header["degree"]), header["include_bias"] == "1")
    header["ridge"] = float(header["ridge"])
    return ColorTransform(np.array(rows), spec), header
