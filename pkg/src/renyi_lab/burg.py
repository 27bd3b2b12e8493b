"""Processes matching prescribed autocovariances ``E[X_i X_{i+k}] = alpha_k``, ``k <= p``.

The AR(p) recursion with Yule-Walker coefficients and innovation variance
``sigma2`` reproduces the autocovariances for any centered uncorrelated
innovations, provided the initial ``p`` values have second-moment matrix
``K_p``. Drawing the initial vector from the scaled eigenvectors of ``K_p``
makes the process a finite mixture of unit-Jacobian images of the innovation
block, which sandwiches its Renyi entropy.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from ._parallel import map_shards
from .errors import InstabilityError, NotPositiveDefiniteError, ValidationError

JACOBI_TOL = 1e-12
JACOBI_SWEEPS = 100
OVERFLOW_GUARD = 1e150


@dataclass(frozen=True, eq=False)
class AutocovSpec:
    alphas: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float).ravel()
        if a.size < 1 or not np.all(np.isfinite(a)):
            raise ValidationError("need finite autocovariances alpha_0..alpha_p")
        try:
            np.linalg.cholesky(toeplitz(a))
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("the Toeplitz matrix of the autocovariances is not positive definite") from None
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    @property
    def p(self) -> int:
        return self.alphas.size - 1

    def matrix(self) -> np.ndarray:
        return toeplitz(self.alphas)


@dataclass(frozen=True, eq=False)
class ARModel:
    a: np.ndarray
    sigma2: float
    Kp: np.ndarray
    reflection: np.ndarray
    alphas: np.ndarray
    q: np.ndarray = field(default_factory=lambda: np.zeros(0))
    w: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def p(self) -> int:
        return self.a.size

    def reconstruction_error(self) -> float:
        """``max |sum_l q_l w_l w_l^T - K_p|``."""
        if self.p == 0:
            return 0.0
        recon = (self.w.T * self.q) @ self.w
        return float(np.max(np.abs(recon - self.Kp)))

    def autocovariance(self, lags) -> np.ndarray:
        """Autocovariances up to ``lags``, extended past ``p`` by the AR recursion."""
        out = list(self.alphas[: lags + 1])
        for k in range(len(out), lags + 1):
            out.append(float(np.dot(self.a, out[k - 1 : k - 1 - self.p : -1] if self.p else [])))
        return np.array(out)

    def to_dict(self):
        return {
            "a": self.a.tolist(),
            "sigma2": self.sigma2,
            "alphas": self.alphas.tolist(),
            "reflection": self.reflection.tolist(),
            "q": self.q.tolist(),
            "w": self.w.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            model = levinson_durbin(AutocovSpec(data["alphas"]))
        except KeyError as exc:
            raise ValidationError(f"model JSON missing key {exc}") from None
        return spectral_init(model)


def levinson_durbin(spec: AutocovSpec) -> ARModel:
    """Solve the Yule-Walker equations ``Toeplitz(alpha_0..alpha_{p-1}) a = (alpha_1..alpha_p)``."""
    if not isinstance(spec, AutocovSpec):
        spec = AutocovSpec(spec)
    al = spec.alphas
    p = spec.p
    a = np.zeros(0)
    err = float(al[0])
    refl = np.zeros(p)
    for m in range(1, p + 1):
        k = (al[m] - np.dot(a, al[m - 1 : 0 : -1])) / err
        a = np.concatenate([a - k * a[::-1], [k]])
        err *= 1.0 - k * k
        refl[m - 1] = k
        if not (abs(k) < 1 and err > 0):
            raise NotPositiveDefiniteError(f"reflection coefficient {k} at order {m} is outside (-1, 1)")
    Kp = toeplitz(al[:p]) if p else np.zeros((0, 0))
    return ARModel(a, err, Kp, refl, al.copy())


def jacobi_eigh(A, tol=JACOBI_TOL, max_sweeps=JACOBI_SWEEPS):
    """Eigenvalues and eigenvectors (columns) of a symmetric matrix by cyclic Jacobi rotations."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max(initial=0))):
        raise ValidationError("matrix must be square and symmetric")
    V = np.eye(n)
    scale = max(np.abs(A).max(initial=0.0), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(np.tril(A, -1) ** 2)))
        if off <= tol * scale:
            break
        for i in range(n - 1):
            for j in range(i + 1, n):
                if A[i, j] == 0.0:
                    continue
                theta = (A[j, j] - A[i, i]) / (2 * A[i, j])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                R = np.eye(n)
                R[i, i] = R[j, j] = c
                R[i, j], R[j, i] = s, -s
                A = R.T @ A @ R
                V = V @ R
    return np.diag(A).copy(), V


def spectral_init(model: ARModel) -> ARModel:
    """Attach atoms ``(q_l, w_l)`` with ``sum q_l w_l w_l^T = K_p``: ``q = lambda / sum lambda``, ``w = sqrt(sum lambda) u``."""
    if model.p == 0:
        return model
    lam, U = jacobi_eigh(model.Kp)
    if np.any(lam <= 0):
        raise NotPositiveDefiniteError("K_p has a nonpositive eigenvalue")
    total = float(lam.sum())
    q = lam / total
    w = math.sqrt(total) * U.T
    out = ARModel(model.a, model.sigma2, model.Kp, model.reflection, model.alphas, q, w)
    err = out.reconstruction_error()
    if err > 1e-10 * max(1.0, float(np.abs(model.Kp).max())):
        raise ValidationError(f"spectral reconstruction error {err:.3g} exceeds 1e-10")
    return out


def fit_burg(alphas) -> ARModel:
    return spectral_init(levinson_durbin(AutocovSpec(alphas)))


# ---------------------------------------------------------------------------
# Simulation


@dataclass(frozen=True, eq=False)
class Ensemble:
    """``x[:, j]`` holds ``X_{j+1-p}``; the first ``p`` columns are the initial vector."""

    x: np.ndarray
    p: int

    @property
    def horizon(self) -> int:
        return self.x.shape[1] - self.p

    @property
    def reps(self) -> int:
        return self.x.shape[0]

    def X(self, i) -> np.ndarray:
        return self.x[:, i - 1 + self.p]


def _innovations(kind, sigma2, size, N, rng):
    if callable(kind):
        return np.asarray(kind(size, N, rng), dtype=float)
    if hasattr(kind, "sample"):
        return kind.sample(size, N, rng)
    if kind == "gauss":
        return rng.normal(0.0, math.sqrt(sigma2), size=(size, N))
    if kind == "correlated":
        # MA(1) with the right variance but lag-one correlation 1/2
        e = rng.normal(0.0, math.sqrt(sigma2 / 2), size=(size, N + 1))
        return e[:, 1:] + e[:, :-1]
    raise ValidationError(f"unknown innovations {kind!r}")


def simulate_ar(model: ARModel, innovations="gauss", N=50, R=1000, seed=0, guard=OVERFLOW_GUARD) -> Ensemble:
    """Run ``X_i = sum_k a_k X_{i-k} + Z_i`` for ``i = 1..N`` over ``R`` replicates.

    The initial vector is drawn from the spectral atoms of ``model`` afresh for
    each replicate. ``innovations`` is ``"gauss"``, ``"correlated"`` (a negative
    control), an object with ``sample(size, m, rng)`` or a callable
    ``(size, N, rng) -> array``.
    """
    if model.p and model.q.size == 0:
        model = spectral_init(model)
    p = model.p
    N, R = int(N), int(R)

    def shard(size, rng):
        x = np.zeros((size, p + N))
        if p:
            atoms = rng.choice(p, size=size, p=model.q / model.q.sum())
            x[:, :p] = model.w[atoms]
        z = _innovations(innovations, model.sigma2, size, N, rng)
        for i in range(N):
            col = p + i
            x[:, col] = x[:, col - p : col][:, ::-1] @ model.a + z[:, i] if p else z[:, i]
        return x

    x = np.concatenate(map_shards(shard, R, seed), axis=0)
    if not np.all(np.isfinite(x)) or np.abs(x).max(initial=0.0) > guard:
        raise InstabilityError("AR recursion overflowed")
    return Ensemble(x, p)


@dataclass(frozen=True)
class BurgCheck:
    ok: bool
    worst_sigmas: float
    tol_sigmas: float
    entries: list

    def to_dict(self):
        return asdict(self)


def verify_burg_constraints(ensemble: Ensemble, spec, tol_sigmas=4.0, probe=None) -> BurgCheck:
    """Compare ensemble means of ``X_i X_{i+k}`` with ``alpha_k`` for ``k <= p`` and ``i`` in ``probe``."""
    alphas = spec.alphas if isinstance(spec, AutocovSpec) else np.asarray(spec, dtype=float)
    p = alphas.size - 1
    N = ensemble.horizon
    if probe is None:
        probe = sorted({1, 2, p + 1, max(1, N // 2), max(1, N - p)})
    entries = []
    worst = 0.0
    for i in probe:
        for k in range(p + 1):
            if i + k > N:
                continue
            prod = ensemble.X(i) * ensemble.X(i + k)
            mu = float(prod.mean())
            se = float(prod.std(ddof=1) / math.sqrt(prod.size))
            score = abs(mu - alphas[k]) / se if se > 0 else (0.0 if mu == alphas[k] else math.inf)
            worst = max(worst, score)
            entries.append({"i": int(i), "k": k, "mean": mu, "stderr": se, "target": float(alphas[k]), "sigmas": score})
    return BurgCheck(bool(worst <= tol_sigmas), float(worst), float(tol_sigmas), entries)


def gauss_markov_shannon_rate(sigma2) -> float:
    """Shannon rate ``log(2 pi e sigma2) / 2`` of the Gauss-Markov process, in nats."""
    if not sigma2 > 0:
        raise ValidationError("sigma2 must be positive")
    return 0.5 * math.log(2 * math.pi * math.e * sigma2)


def ar_jacobian(model: ARModel, n) -> np.ndarray:
    """Matrix ``dX_1^n / dZ_1^n`` for a fixed initial vector: lower triangular with unit diagonal."""
    J = np.eye(n)
    for i in range(n):
        for k, ak in enumerate(model.a, start=1):
            if i - k >= 0:
                J[i] += ak * J[i - k]
    return J


@dataclass(frozen=True)
class SandwichReport:
    n: int
    alpha: float
    hZ: float
    lower: float
    upper: float
    gap: float

    @property
    def rate_gap(self) -> float:
        return self.gap / self.n

    def to_dict(self):
        d = asdict(self)
        d["rate_gap"] = self.rate_gap
        d["lower_rate"] = self.lower / self.n
        d["upper_rate"] = self.upper / self.n
        return d


def renyi_rate_sandwich(hZ, q, alpha, n) -> SandwichReport:
    """Bounds on ``h_alpha(X_1^n)`` from ``h_alpha(Z_1^n)`` and the spectral weights.

    Given the initial atom, ``X_1^n`` is a unit-Jacobian affine image of
    ``Z_1^n``, so the process is a ``q``-mixture of densities that all have
    entropy ``hZ``. For ``alpha > 1`` the excess is ``min_l alpha/(1-alpha) log q_l``;
    for ``alpha < 1`` it is ``log(p) / (1 - alpha)``.
    """
    alpha = float(alpha)
    if alpha <= 0 or alpha == 1:
        raise ValidationError("alpha must be positive and != 1")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.size == 0:
        q = np.ones(1)
    if np.any(q < 0) or abs(q.sum() - 1) > 1e-12:
        raise ValidationError("spectral weights must be nonnegative and sum to 1")
    q = q[q > 0]
    if alpha > 1:
        extra = float(np.min(alpha / (1 - alpha) * np.log(q)))
    else:
        extra = math.log(q.size) / (1 - alpha)
    return SandwichReport(int(n), alpha, float(hZ), float(hZ), float(hZ) + extra, extra)


def gaussian_window_entropy(model: ARModel, n, alpha, w=None) -> float:
    """Order-``alpha`` entropy of ``X_1^n`` given the initial vector, for Gaussian innovations.

    Conditioning fixes the mean; the covariance is ``sigma2 J J^T`` with the
    unit-Jacobian ``J`` of :func:`ar_jacobian`, so the value is computed from
    its log-determinant and should equal ``n`` times the innovation entropy.
    """
    alpha = float(alpha)
    J = ar_jacobian(model, n)
    _, logdet = np.linalg.slogdet(model.sigma2 * J @ J.T)
    base = 0.5 * (n * math.log(2 * math.pi) + logdet)
    if alpha == 1:
        return base + 0.5 * n
    return base + n * math.log(alpha) / (2 * (alpha - 1))
