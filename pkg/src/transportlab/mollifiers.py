"""Admissible mollification kernels and their anisotropy functionals.

The base profile is the polynomial bump

    theta(z) = c_d (1 - |z|^2)^4   on the unit ball, 0 outside,

which is even, nonnegative, C^3, supported in B_1 and normalized to unit
mass (c_1 = 315/256, c_2 = 5/pi).  Anisotropic variants are

    theta_A(z) = det(A) * theta(A z)

for symmetric positive-definite A with smallest eigenvalue >= 1, so the
support stays inside B_1 and the mass stays exactly 1.

Two functionals quantify how a kernel interacts with a matrix M:

    Lambda(M, theta) = int |<M z, grad theta(z)>| dz
    I(theta)         = int |z| |grad theta(z)| dz

Both are evaluated by a midpoint rule in the base coordinates w = A z,
where the integrand is smooth uniformly in the aspect ratio:

    Lambda(M, theta_A) = int_{B_1} |<(A M A^-1) w, grad theta(w)>| dw
    I(theta_A)         = int_{B_1} |A^-1 w| |A grad theta(w)| dw

Integration by parts gives the exact lower bounds Lambda >= |trace M| and
I >= d; making Lambda small on rank-one matrices eta x zeta with
eta . zeta = 0 is what the anisotropic search demonstrates.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

__all__ = [
    "Kernel",
    "AuxKernelRho",
    "isotropic_kernel",
    "anisotropic_kernel",
    "eval_and_grad",
    "i_functional",
    "lambda_functional",
    "minimize_lambda_rank_one",
    "kernel_mass_quadrature",
    "kernel_to_json",
    "kernel_from_json",
]

# Unit-mass constants of the base profile, int c_d (1-|z|^2)^4 dz = 1.
_NORMALIZATION = {1: 315.0 / 256.0, 2: 5.0 / math.pi}

# Midpoint-rule resolution (cells per axis on [-1,1]) for the functionals.
_DEFAULT_QUAD = {1: 8192, 2: 512}

_BALL_VOLUME = {1: 2.0, 2: math.pi}


@dataclasses.dataclass(frozen=True, eq=False)
class Kernel:
    """Even nonnegative C^3 kernel supported in the unit ball."""

    dim: int
    A: np.ndarray  # symmetric positive definite, min eigenvalue >= 1

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape != (self.dim, self.dim):
            raise ValueError(f"A must be {self.dim}x{self.dim}")
        if not np.allclose(A, A.T, atol=1e-12):
            raise ValueError("A must be symmetric")
        eig = np.linalg.eigvalsh(A)
        if eig.min() < 1.0 - 1e-12:
            raise ValueError("smallest eigenvalue of A must be >= 1")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def normalization(self) -> float:
        return _NORMALIZATION[self.dim]

    @property
    def is_isotropic(self) -> bool:
        return bool(np.allclose(self.A, np.eye(self.dim), atol=1e-12))

    @property
    def shape_tag(self) -> str:
        return "isotropic-bump" if self.is_isotropic else "anisotropic"

    @property
    def det_A(self) -> float:
        return float(np.linalg.det(self.A))

    @property
    def A_inv(self) -> np.ndarray:
        return np.linalg.inv(self.A)

    def value(self, z: np.ndarray) -> np.ndarray:
        """theta_A at points of shape (..., dim)."""
        z = np.asarray(z, dtype=float)
        w = z @ self.A  # A symmetric: (A z)_i = (z A)_i
        q = np.sum(w * w, axis=-1)
        body = np.clip(1.0 - q, 0.0, None)
        return self.det_A * self.normalization * body**4

    def value_and_grad(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        w = z @ self.A
        q = np.sum(w * w, axis=-1)
        body = np.clip(1.0 - q, 0.0, None)
        val = self.det_A * self.normalization * body**4
        # grad theta_A(z) = -8 det(A) c_d (1-|Az|^2)^3 A(Az)
        grad = (-8.0 * self.det_A * self.normalization * body**3)[..., None] * (w @ self.A)
        return val, grad

    def value_scaled(self, x: np.ndarray, eps: float) -> np.ndarray:
        """theta_eps(x) = eps^-d theta(x/eps)."""
        x = np.asarray(x, dtype=float)
        return self.value(x / eps) / eps**self.dim

    def grad_scaled(self, x: np.ndarray, eps: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.value_and_grad(x / eps)[1] / eps ** (self.dim + 1)


def isotropic_kernel(dim: int) -> Kernel:
    return Kernel(dim=dim, A=np.eye(dim))


def anisotropic_kernel(A: np.ndarray) -> Kernel:
    A = np.asarray(A, dtype=float)
    return Kernel(dim=A.shape[0], A=A)


def eval_and_grad(kernel: Kernel, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kernel value and gradient at ``z``; both vanish for |Az| >= 1."""
    return kernel.value_and_grad(z)


def _midpoint_nodes(dim: int, n: int) -> tuple[np.ndarray, float]:
    """Cell centers of an n^dim midpoint rule on [-1,1]^dim and cell volume."""
    step = 2.0 / n
    ax = -1.0 + (np.arange(n) + 0.5) * step
    if dim == 1:
        return ax[:, None], step
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel()], axis=-1), step**2


def _base_grad(w: np.ndarray, dim: int) -> np.ndarray:
    q = np.sum(w * w, axis=-1)
    body = np.clip(1.0 - q, 0.0, None)
    return (-8.0 * _NORMALIZATION[dim] * body**3)[..., None] * w


def kernel_mass_quadrature(kernel: Kernel, n: int | None = None) -> float:
    """Midpoint quadrature of the kernel mass (computed in base coordinates,
    where it equals the mass of theta_A exactly by substitution)."""
    n = n or _DEFAULT_QUAD[kernel.dim]
    w, vol = _midpoint_nodes(kernel.dim, n)
    q = np.sum(w * w, axis=-1)
    body = np.clip(1.0 - q, 0.0, None)
    return float(np.sum(_NORMALIZATION[kernel.dim] * body**4) * vol)


def i_functional(kernel: Kernel, n: int | None = None) -> float:
    """I(theta) = int |z| |grad theta(z)| dz, midpoint rule; >= dim up to
    quadrature error."""
    n = n or _DEFAULT_QUAD[kernel.dim]
    w, vol = _midpoint_nodes(kernel.dim, n)
    g = _base_grad(w, kernel.dim)
    zlen = np.linalg.norm(w @ kernel.A_inv.T, axis=-1)
    glen = np.linalg.norm(g @ kernel.A.T, axis=-1)
    return float(np.sum(zlen * glen) * vol)


def lambda_functional(M: np.ndarray, kernel: Kernel, n: int | None = None) -> float:
    """Lambda(M, theta) = int |<M z, grad theta(z)>| dz, midpoint rule.

    Satisfies Lambda >= |trace M| and Lambda <= ||M||_op * I(theta), both up
    to quadrature error; positively homogeneous and subadditive in M.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (kernel.dim, kernel.dim):
        raise ValueError(f"M must be {kernel.dim}x{kernel.dim}")
    n = n or _DEFAULT_QUAD[kernel.dim]
    w, vol = _midpoint_nodes(kernel.dim, n)
    g = _base_grad(w, kernel.dim)
    Mt = kernel.A @ M @ kernel.A_inv
    inner = np.sum((w @ Mt.T) * g, axis=-1)
    return float(np.sum(np.abs(inner)) * vol)


def minimize_lambda_rank_one(
    eta: np.ndarray,
    zeta: np.ndarray,
    budget: int,
    n: int | None = None,
) -> tuple[Kernel, float]:
    """Search anisotropic kernels to shrink Lambda(eta x zeta, theta).

    Candidates are A_k = I + (a_k - 1) zeta zeta^T with a_k = 2^k,
    k = 0..budget-1: stretching the base profile along zeta contracts the
    zeta factor of the rank-one matrix.  For eta . zeta = 0 this scales
    Lambda by 1/a_k; for eta = zeta the matrix is invariant, the trace
    lower bound binds and the search returns the isotropic kernel.
    Candidate ladders are nested, so the achieved Lambda is monotone in
    the budget; ties break toward the smaller aspect ratio.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    eta = np.asarray(eta, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if eta.shape != (2,) or zeta.shape != (2,):
        raise ValueError("the rank-one search is implemented for dim=2")
    eta = eta / np.linalg.norm(eta)
    zeta = zeta / np.linalg.norm(zeta)
    M = np.outer(eta, zeta)

    best_kernel: Kernel | None = None
    best_value = math.inf
    for k in range(budget):
        a = 2.0**k
        A = np.eye(2) + (a - 1.0) * np.outer(zeta, zeta)
        cand = Kernel(dim=2, A=A)
        val = lambda_functional(M, cand, n=n)
        if val < best_value:
            best_kernel, best_value = cand, val
    assert best_kernel is not None
    return best_kernel, best_value


@dataclasses.dataclass(frozen=True, eq=False)
class AuxKernelRho:
    """Averaged auxiliary kernel rho_eps = (theta_eps + rho'_eps) / 2.

    rho'_eps(z) is proportional to (1/eps) int_0^eps t^-d 1_{|z|<=t} dt,
    normalized here by the unit-ball volume so the average has unit mass.
    Closed forms: (1/(2 eps)) log(eps/|z|) in 1D and
    (1/(pi eps)) (1/|z| - 1/eps) in 2D, both supported in B_eps with an
    integrable singularity at the origin.
    """

    eps: float
    kernel: Kernel

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def rho_prime(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)
        out = np.zeros_like(r)
        inside = (r > 0) & (r < self.eps)
        if self.dim == 1:
            out[inside] = np.log(self.eps / r[inside]) / (2.0 * self.eps)
        else:
            out[inside] = (1.0 / r[inside] - 1.0 / self.eps) / (math.pi * self.eps)
        out[r == 0] = np.inf
        return out

    def value(self, z: np.ndarray) -> np.ndarray:
        return 0.5 * (self.kernel.value_scaled(z, self.eps) + self.rho_prime(z))


def kernel_to_json(kernel: Kernel) -> str:
    return json.dumps(
        {
            "dim": kernel.dim,
            "shape": kernel.shape_tag,
            "A": [float(v) for v in kernel.A.ravel()],
            "normalization": kernel.normalization,
        },
        sort_keys=True,
    )


def kernel_from_json(text: str) -> Kernel:
    doc = json.loads(text)
    dim = int(doc["dim"])
    A = np.asarray(doc["A"], dtype=float).reshape(dim, dim)
    return Kernel(dim=dim, A=A)
