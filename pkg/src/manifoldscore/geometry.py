"""Analytic embedded manifolds with exact differential-geometric primitives.

Every manifold here is a compact (or affinely truncated) subset of an ambient
Euclidean space with a known reach, so nearest-point projection, tangent
frames, exponential/log maps, covering atlases and partitions of unity can be
computed to floating-point accuracy.  Conventions:

* tangent coordinates are expressed in the orthonormal frame returned by
  ``tangent_frame`` at the relevant base point;
* ``project(x, t)``/``distance(x, t)`` act on the scaled manifold
  ``exp(-t/2) * M`` used by the forward diffusion;
* quadrature rules return (points, weights) for the manifold volume measure,
  with node counts doubling per axis per level.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import (
    AmbiguousProjection,
    BeyondInjectivityRadius,
    CutLocus,
    InvalidRadius,
    NotOnManifold,
    OutsideReach,
    WrongManifoldKind,
)
from .tolerances import TOL
from .validation import check_points

INFINITE_REACH = np.inf


def _alpha(t: float) -> float:
    return float(np.exp(-0.5 * t))


class EmbeddedManifold(ABC):
    """A d-dimensional manifold isometrically embedded in R^D."""

    kind: str
    intrinsic_dim: int
    ambient_dim: int
    reach: float
    coord_bound: float

    # -- membership ------------------------------------------------------

    def contains(self, x, tol: float = TOL.on_manifold) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(self.distance(x, 0.0) <= tol)

    def _require_on_manifold(self, p, tol: float = TOL.on_manifold):
        p = np.asarray(p, dtype=np.float64)
        d = self.distance(p, 0.0)
        if d > tol:
            raise NotOnManifold(f"point at distance {d:.3e} from the manifold")
        return p

    # -- projection -------------------------------------------------------

    @abstractmethod
    def _project_unscaled(self, X: np.ndarray) -> np.ndarray:
        """Nearest points on M for a batch X (no reach guard)."""

    def distance(self, x, t: float = 0.0):
        """Euclidean distance to alpha_t * M (total function)."""
        X, single = check_points(x, self.ambient_dim)
        a = _alpha(t)
        proj = a * self._project_unscaled(X / a)
        d = np.linalg.norm(X - proj, axis=1)
        return float(d[0]) if single else d

    def project(self, x, t: float = 0.0):
        """Unique nearest point on alpha_t * M.

        Raises OutsideReach when the strict uniqueness precondition
        dist(x, alpha_t M) < alpha_t * tau fails (boundary cases within the
        reach tolerance are rejected rather than resolved).
        """
        X, single = check_points(x, self.ambient_dim)
        a = _alpha(t)
        proj = a * self._project_unscaled(X / a)
        if np.isfinite(self.reach):
            d = np.linalg.norm(X - proj, axis=1)
            limit = a * self.reach - TOL.reach_boundary
            bad = d >= limit
            if np.any(bad):
                raise OutsideReach(
                    f"{int(bad.sum())} point(s) at distance >= alpha_t*tau - "
                    f"{TOL.reach_boundary:g} from the scaled manifold"
                )
        return proj[0] if single else proj

    # -- local geometry ---------------------------------------------------

    @abstractmethod
    def tangent_frame(self, p) -> np.ndarray:
        """(D, d) matrix with orthonormal columns spanning T_p M."""

    @abstractmethod
    def exp(self, p, v) -> np.ndarray:
        """Exponential map; v holds tangent coordinates in tangent_frame(p)."""

    @abstractmethod
    def log(self, p, y) -> np.ndarray:
        """Inverse of exp: tangent coordinates of y in tangent_frame(p)."""

    def geodesic_distance(self, p, q) -> float:
        return float(np.linalg.norm(self.log(p, q)))

    def injectivity_bound(self) -> float:
        """Lower bound pi * tau on the injectivity radius."""
        return np.pi * self.reach

    def _check_exp_domain(self, v):
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        if v.shape != (self.intrinsic_dim,):
            raise ValueError(
                f"tangent coordinates must have shape ({self.intrinsic_dim},)"
            )
        if np.linalg.norm(v) >= self.injectivity_bound():
            raise BeyondInjectivityRadius(
                f"|v| = {np.linalg.norm(v):.6g} >= pi*tau = {self.injectivity_bound():.6g}"
            )
        return v

    # -- measure ----------------------------------------------------------

    @abstractmethod
    def quadrature(self, level: int = 0):
        """(points (N, D), weights (N,)) for the volume measure; weights sum
        to the manifold volume.  Node counts double per axis per level."""

    @abstractmethod
    def volume(self) -> float:
        ...

    @abstractmethod
    def sample_uniform(self, n: int, rng: np.random.Generator) -> np.ndarray:
        ...

    def metric_volume_factor(self, p, v) -> float:
        """sqrt(det g) of the exponential-map pullback metric at tangent
        coordinates v around p; equals 1 at v = 0."""
        d = self.intrinsic_dim
        if d == 0:
            return 1.0
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        step = 1e-6
        cols = np.empty((self.ambient_dim, d))
        for i in range(d):
            dv = np.zeros(d)
            dv[i] = step
            cols[:, i] = (self.exp(p, v + dv) - self.exp(p, v - dv)) / (2 * step)
        gram = cols.T @ cols
        return float(np.sqrt(max(np.linalg.det(gram), 0.0)))


# ---------------------------------------------------------------------------


class Circle(EmbeddedManifold):
    """Circle of given radius in R^2."""

    kind = "circle"

    def __init__(self, radius: float = 1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.intrinsic_dim = 1
        self.ambient_dim = 2
        self.reach = self.radius
        self.coord_bound = self.radius

    def _project_unscaled(self, X):
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0.0):
            # distance to every circle point ties; caught by the reach guard
            norms = np.where(norms == 0.0, 1.0, norms)
            return self.radius * X / norms[:, None]
        return self.radius * X / norms[:, None]

    def tangent_frame(self, p):
        p = self._require_on_manifold(p)
        u = np.array([-p[1], p[0]]) / np.linalg.norm(p)
        return u[:, None]

    def exp(self, p, v):
        p = self._require_on_manifold(p)
        v = self._check_exp_domain(v)
        a = float(v[0]) / self.radius
        u = self.tangent_frame(p)[:, 0]
        return p * np.cos(a) + self.radius * u * np.sin(a)

    def log(self, p, y):
        p = self._require_on_manifold(p)
        y = self._require_on_manifold(y)
        u = self.tangent_frame(p)[:, 0]
        ang = np.arctan2(np.dot(y, u), np.dot(y, p) / self.radius)
        if self.radius * (np.pi - abs(ang)) < 0.5 * TOL.projection_tie:
            raise CutLocus("antipodal points: both arcs have equal length")
        return np.array([self.radius * ang])

    def geodesic_distance(self, p, q):
        c = np.clip(np.dot(p, q) / self.radius**2, -1.0, 1.0)
        return self.radius * float(np.arccos(c))

    def quadrature(self, level: int = 0):
        n = 256 << level
        theta = 2 * np.pi * np.arange(n) / n
        pts = self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        w = np.full(n, 2 * np.pi * self.radius / n)
        return pts, w

    def volume(self):
        return 2 * np.pi * self.radius

    def sample_uniform(self, n, rng):
        theta = rng.uniform(0.0, 2 * np.pi, size=n)
        return self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)


class Sphere(EmbeddedManifold):
    """Round d-sphere of given radius in R^(d+1)."""

    kind = "sphere"

    def __init__(self, intrinsic_dim: int = 2, radius: float = 1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        if intrinsic_dim < 1:
            raise ValueError("sphere intrinsic dimension must be >= 1")
        self.radius = float(radius)
        self.intrinsic_dim = int(intrinsic_dim)
        self.ambient_dim = self.intrinsic_dim + 1
        self.reach = self.radius
        self.coord_bound = self.radius

    def _project_unscaled(self, X):
        norms = np.linalg.norm(X, axis=1)
        norms = np.where(norms == 0.0, 1.0, norms)
        return self.radius * X / norms[:, None]

    def tangent_frame(self, p):
        p = self._require_on_manifold(p)
        unit = p / np.linalg.norm(p)
        v = unit.copy()
        v[0] += np.copysign(1.0, unit[0])
        H = np.eye(self.ambient_dim) - 2.0 * np.outer(v, v) / np.dot(v, v)
        return H[:, 1:]

    def exp(self, p, v):
        p = self._require_on_manifold(p)
        v = self._check_exp_domain(v)
        s = np.linalg.norm(v)
        if s == 0.0:
            return p.copy()
        V = self.tangent_frame(p) @ v
        return p * np.cos(s / self.radius) + self.radius * (V / s) * np.sin(s / self.radius)

    def log(self, p, y):
        p = self._require_on_manifold(p)
        y = self._require_on_manifold(y)
        rho2 = self.radius**2
        c = np.clip(np.dot(p, y) / rho2, -1.0, 1.0)
        omega = np.arccos(c)
        perp = y - (np.dot(p, y) / rho2) * p
        nperp = np.linalg.norm(perp)
        if self.radius * (np.pi - omega) < 0.5 * TOL.projection_tie or (
            nperp < 1e-300 and c < 0
        ):
            raise CutLocus("antipodal points on the sphere")
        if nperp == 0.0:
            return np.zeros(self.intrinsic_dim)
        frame = self.tangent_frame(p)
        return (self.radius * omega / nperp) * (frame.T @ perp)

    def geodesic_distance(self, p, q):
        c = np.clip(np.dot(p, q) / self.radius**2, -1.0, 1.0)
        return self.radius * float(np.arccos(c))

    def quadrature(self, level: int = 0):
        if self.intrinsic_dim == 1:
            n = 256 << level
            theta = 2 * np.pi * np.arange(n) / n
            pts = self.radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
            w = np.full(n, 2 * np.pi * self.radius / n)
            return pts, w
        if self.intrinsic_dim != 2:
            raise NotImplementedError(
                "deterministic quadrature implemented for spheres of intrinsic dim 1 or 2"
            )
        n_polar = 16 << level
        n_azim = 32 << level
        u, wu = np.polynomial.legendre.leggauss(n_polar)
        phi = 2 * np.pi * np.arange(n_azim) / n_azim
        su = np.sqrt(1.0 - u**2)
        X = self.radius * np.stack(
            [
                np.outer(su, np.cos(phi)).ravel(),
                np.outer(su, np.sin(phi)).ravel(),
                np.outer(u, np.ones(n_azim)).ravel(),
            ],
            axis=1,
        )
        w = self.radius**2 * np.outer(wu, np.full(n_azim, 2 * np.pi / n_azim)).ravel()
        return X, w

    def volume(self):
        d = self.intrinsic_dim
        from scipy.special import gamma

        return float(2 * np.pi ** ((d + 1) / 2) / gamma((d + 1) / 2) * self.radius**d)

    def sample_uniform(self, n, rng):
        z = rng.standard_normal((n, self.ambient_dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return self.radius * z


class Torus(EmbeddedManifold):
    """Torus of revolution in R^3 with tube radius r_minor around a circle of
    radius R_major.  Requires R_major >= 2*r_minor so the reach equals r_minor.
    """

    kind = "torus"

    def __init__(self, r_major: float = 1.0, r_minor: float = 0.4):
        if r_minor <= 0 or r_major <= 0:
            raise ValueError("torus radii must be positive")
        if r_major < 2 * r_minor:
            raise ValueError(
                "require R_major >= 2*r_minor so the reach equals r_minor"
            )
        self.r_major = float(r_major)
        self.r_minor = float(r_minor)
        self.intrinsic_dim = 2
        self.ambient_dim = 3
        self.reach = self.r_minor
        self.coord_bound = self.r_major + self.r_minor

    # angles: theta around the tube, phi around the axis
    def _angles(self, p):
        rho = np.hypot(p[0], p[1])
        phi = np.arctan2(p[1], p[0])
        theta = np.arctan2(p[2] / self.r_minor, (rho - self.r_major) / self.r_minor)
        return theta, phi

    def _point(self, theta, phi):
        w = self.r_major + self.r_minor * np.cos(theta)
        return np.array(
            [w * np.cos(phi), w * np.sin(phi), self.r_minor * np.sin(theta)]
        )

    def _project_unscaled(self, X):
        rho = np.hypot(X[:, 0], X[:, 1])
        safe = np.where(rho == 0.0, 1.0, rho)
        cx, cy = self.r_major * X[:, 0] / safe, self.r_major * X[:, 1] / safe
        wx, wz = rho - self.r_major, X[:, 2]
        wn = np.hypot(wx, wz)
        wn_safe = np.where(wn == 0.0, 1.0, wn)
        ux, uz = wx / wn_safe, wz / wn_safe
        out = np.empty_like(X)
        scale = (self.r_major + self.r_minor * ux) / self.r_major
        out[:, 0] = cx * scale
        out[:, 1] = cy * scale
        out[:, 2] = self.r_minor * uz
        return out

    def distance(self, x, t: float = 0.0):
        # closed form valid everywhere, including the symmetry axis
        X, single = check_points(x, self.ambient_dim)
        a = _alpha(t)
        rho = np.hypot(X[:, 0], X[:, 1])
        d = np.abs(np.hypot(rho - a * self.r_major, X[:, 2]) - a * self.r_minor)
        return float(d[0]) if single else d

    def tangent_frame(self, p):
        p = self._require_on_manifold(p)
        theta, phi = self._angles(p)
        t_theta = np.array(
            [-np.cos(phi) * np.sin(theta), -np.sin(phi) * np.sin(theta), np.cos(theta)]
        )
        t_phi = np.array([-np.sin(phi), np.cos(phi), 0.0])
        return np.stack([t_theta, t_phi], axis=1)

    def _geodesic_rhs(self, state):
        theta, phi, dtheta, dphi = state
        w = self.r_major + self.r_minor * np.cos(theta)
        ddtheta = w * np.sin(theta) / self.r_minor * dphi**2
        ddphi = 2 * self.r_minor * np.sin(theta) / w * dtheta * dphi
        return np.array([dtheta, dphi, ddtheta, ddphi])

    def _integrate_geodesic(self, theta, phi, dtheta, dphi, length):
        n_steps = max(192, int(np.ceil(768 * length / (np.pi * self.r_minor))))
        h = length / n_steps
        state = np.array([theta, phi, dtheta, dphi])
        for _ in range(n_steps):
            k1 = self._geodesic_rhs(state)
            k2 = self._geodesic_rhs(state + 0.5 * h * k1)
            k3 = self._geodesic_rhs(state + 0.5 * h * k2)
            k4 = self._geodesic_rhs(state + h * k3)
            state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return state

    def exp(self, p, v):
        p = self._require_on_manifold(p)
        v = self._check_exp_domain(v)
        s = np.linalg.norm(v)
        if s == 0.0:
            return p.copy()
        theta, phi = self._angles(p)
        w = self.r_major + self.r_minor * np.cos(theta)
        # unit-speed initial velocity in angle coordinates
        dtheta = v[0] / (s * self.r_minor)
        dphi = v[1] / (s * w)
        state = self._integrate_geodesic(theta, phi, dtheta, dphi, s)
        return self._point(state[0], state[1])

    def log(self, p, y):
        p = self._require_on_manifold(p)
        y = self._require_on_manifold(y)
        theta_p, phi_p = self._angles(p)
        theta_y, phi_y = self._angles(y)
        wrap = lambda a: (a + np.pi) % (2 * np.pi) - np.pi
        w = self.r_major + self.r_minor * np.cos(theta_p)
        v = np.array([self.r_minor * wrap(theta_y - theta_p), w * wrap(phi_y - phi_p)])
        if np.linalg.norm(v) < 1e-14:
            return np.zeros(2)
        step = 1e-7
        for _ in range(60):
            if np.linalg.norm(v) >= self.injectivity_bound():
                raise BeyondInjectivityRadius("log-map shooting left the injectivity ball")
            res = self.exp(p, v) - y
            if np.linalg.norm(res) < 1e-12:
                return v
            J = np.empty((3, 2))
            for i in range(2):
                dv = np.zeros(2)
                dv[i] = step
                J[:, i] = (self.exp(p, v + dv) - self.exp(p, v - dv)) / (2 * step)
            delta, *_ = np.linalg.lstsq(J, res, rcond=None)
            v = v - delta
        raise BeyondInjectivityRadius("log-map shooting did not converge")

    def quadrature(self, level: int = 0):
        n_theta = 24 << level
        n_phi = 48 << level
        theta = 2 * np.pi * np.arange(n_theta) / n_theta
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        T, P = np.meshgrid(theta, phi, indexing="ij")
        w_ring = self.r_major + self.r_minor * np.cos(T)
        X = np.stack(
            [w_ring * np.cos(P), w_ring * np.sin(P), self.r_minor * np.sin(T)], axis=-1
        ).reshape(-1, 3)
        w = (self.r_minor * w_ring * (2 * np.pi / n_theta) * (2 * np.pi / n_phi)).ravel()
        return X, w

    def volume(self):
        return 4 * np.pi**2 * self.r_major * self.r_minor

    def sample_uniform(self, n, rng):
        out = np.empty((n, 3))
        filled = 0
        while filled < n:
            m = 2 * (n - filled) + 16
            theta = rng.uniform(0.0, 2 * np.pi, size=m)
            u = rng.uniform(0.0, 1.0, size=m)
            keep = theta[
                u < (self.r_major + self.r_minor * np.cos(theta)) / (self.r_major + self.r_minor)
            ]
            take = keep[: n - filled]
            phi = rng.uniform(0.0, 2 * np.pi, size=take.size)
            w = self.r_major + self.r_minor * np.cos(take)
            out[filled : filled + take.size] = np.stack(
                [w * np.cos(phi), w * np.sin(phi), self.r_minor * np.sin(take)], axis=1
            )
            filled += take.size
        return out


class LinearSubspace(EmbeddedManifold):
    """Affine-free linear subspace spanned by the orthonormal columns of A,
    truncated to the latent cube [-latent_bound, latent_bound]^d for all
    measure-related operations (sampling, quadrature, volume)."""

    kind = "linear_subspace"

    def __init__(self, basis: np.ndarray, latent_bound: float = 1.0):
        A = np.asarray(basis, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] < A.shape[1]:
            raise ValueError("basis must be a D x d matrix with D >= d")
        if not np.allclose(A.T @ A, np.eye(A.shape[1]), atol=TOL.orthonormal):
            raise ValueError("basis columns must be orthonormal to 1e-12")
        if latent_bound <= 0:
            raise ValueError("latent_bound must be positive")
        self.basis = A
        self.latent_bound = float(latent_bound)
        self.ambient_dim, self.intrinsic_dim = A.shape
        self.reach = INFINITE_REACH
        self.coord_bound = self.latent_bound * float(
            np.max(np.linalg.norm(A, axis=1)) * np.sqrt(self.intrinsic_dim)
        )

    def _project_unscaled(self, X):
        return X @ self.basis @ self.basis.T

    def project(self, x, t: float = 0.0):
        # scale-invariant: A A^T x for every t
        X, single = check_points(x, self.ambient_dim)
        proj = self._project_unscaled(X)
        return proj[0] if single else proj

    def distance(self, x, t: float = 0.0):
        X, single = check_points(x, self.ambient_dim)
        d = np.linalg.norm(X - self._project_unscaled(X), axis=1)
        return float(d[0]) if single else d

    def tangent_frame(self, p):
        return self.basis.copy()

    def exp(self, p, v):
        p = np.asarray(p, dtype=np.float64)
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        return p + self.basis @ v

    def log(self, p, y):
        return self.basis.T @ (np.asarray(y, dtype=np.float64) - np.asarray(p, dtype=np.float64))

    def geodesic_distance(self, p, q):
        return float(np.linalg.norm(np.asarray(q) - np.asarray(p)))

    def quadrature(self, level: int = 0):
        if self.intrinsic_dim > 2:
            raise NotImplementedError("latent quadrature implemented for d <= 2")
        n = (128 if self.intrinsic_dim == 1 else 24) << level
        u, wu = np.polynomial.legendre.leggauss(n)
        u = self.latent_bound * u
        wu = self.latent_bound * wu
        if self.intrinsic_dim == 1:
            Z = u[:, None]
            W = wu
        else:
            Z = np.stack([g.ravel() for g in np.meshgrid(u, u, indexing="ij")], axis=1)
            W = np.outer(wu, wu).ravel()
        return Z @ self.basis.T, W

    def volume(self):
        return (2 * self.latent_bound) ** self.intrinsic_dim

    def sample_uniform(self, n, rng):
        z = rng.uniform(-self.latent_bound, self.latent_bound, size=(n, self.intrinsic_dim))
        return z @ self.basis.T


class PointSet(EmbeddedManifold):
    """Finite set of ambient points treated as a 0-dimensional manifold.

    The volume measure is counting measure; exp/log are defined only at v=0.
    Exercises the Gaussian-mixture closed forms of the score oracle.
    """

    kind = "point_set"

    def __init__(self, points: np.ndarray):
        P = np.asarray(points, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] < 1:
            raise ValueError("points must be an (m, D) array with m >= 1")
        self.points = P
        self.intrinsic_dim = 0
        self.ambient_dim = P.shape[1]
        if P.shape[0] == 1:
            self.reach = INFINITE_REACH
        else:
            diff = P[:, None, :] - P[None, :, :]
            dist = np.linalg.norm(diff, axis=2)
            np.fill_diagonal(dist, np.inf)
            gap = float(dist.min())
            if gap <= 0:
                raise ValueError("point set atoms must be distinct")
            self.reach = 0.5 * gap
        self.coord_bound = float(np.max(np.abs(P))) if P.size else 0.0

    def _project_unscaled(self, X):
        d = np.linalg.norm(X[:, None, :] - self.points[None, :, :], axis=2)
        idx = np.argmin(d, axis=1)
        if self.points.shape[0] > 1:
            srt = np.sort(d, axis=1)
            ties = srt[:, 1] - srt[:, 0] < TOL.projection_tie
            if np.any(ties):
                raise AmbiguousProjection(
                    f"{int(ties.sum())} point(s) equidistant from two atoms"
                )
        return self.points[idx]

    def nearest_atom(self, x, t: float = 0.0) -> int:
        X, _ = check_points(x, self.ambient_dim)
        a = _alpha(t)
        d = np.linalg.norm(X[0][None, :] - a * self.points, axis=1)
        return int(np.argmin(d))

    def tangent_frame(self, p):
        self._require_on_manifold(p)
        return np.zeros((self.ambient_dim, 0))

    def exp(self, p, v):
        p = self._require_on_manifold(p)
        v = np.atleast_1d(np.asarray(v, dtype=np.float64))
        if v.size and np.any(v != 0.0):
            raise BeyondInjectivityRadius("point-set exp is defined only at v = 0")
        return p.copy()

    def log(self, p, y):
        p = self._require_on_manifold(p)
        y = self._require_on_manifold(y)
        if np.linalg.norm(np.asarray(y) - p) > TOL.on_manifold:
            raise BeyondInjectivityRadius("point-set log is defined only at y = p")
        return np.zeros(0)

    def geodesic_distance(self, p, q):
        return 0.0 if np.linalg.norm(np.asarray(q) - np.asarray(p)) <= TOL.on_manifold else np.inf

    def quadrature(self, level: int = 0):
        return self.points.copy(), np.ones(self.points.shape[0])

    def volume(self):
        return float(self.points.shape[0])

    def sample_uniform(self, n, rng):
        idx = rng.integers(0, self.points.shape[0], size=n)
        return self.points[idx]


# ---------------------------------------------------------------------------
# Atlas and partition of unity


def _mollifier(s: np.ndarray) -> np.ndarray:
    """Compactly supported bump exp(-1/(1-s^2)) on |s| < 1, zero outside."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out


@dataclass(frozen=True)
class Chart:
    """Geodesic-ball chart (U_k, Log_k) with a fixed orthonormal frame."""

    index: int
    center: np.ndarray
    radius: float
    frame: np.ndarray
    manifold: EmbeddedManifold = field(repr=False)

    def log(self, y) -> np.ndarray:
        return self.manifold.log(self.center, y)

    def exp(self, v) -> np.ndarray:
        return self.manifold.exp(self.center, v)


class Atlas:
    """Finite cover of a manifold by geodesic balls plus a smooth partition
    of unity built from normalized compactly supported mollifiers."""

    def __init__(self, manifold: EmbeddedManifold, charts, support_radius: float,
                 torus_fields=None):
        self.manifold = manifold
        self.charts = list(charts)
        self.support_radius = float(support_radius)
        self._torus_fields = torus_fields  # (theta_grid, phi_grid, dist (C, nt, np))

    def __len__(self):
        return len(self.charts)

    @property
    def centers(self) -> np.ndarray:
        return np.stack([c.center for c in self.charts], axis=0)

    # -- geodesic distance from every center to a batch of manifold points --

    def center_distances(self, X: np.ndarray) -> np.ndarray:
        m = self.manifold
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        C = self.centers
        if m.kind == "circle" or (m.kind == "sphere"):
            dots = C @ X.T / m.radius**2
            return m.radius * np.arccos(np.clip(dots, -1.0, 1.0))
        if m.kind == "linear_subspace":
            return np.linalg.norm(C[:, None, :] - X[None, :, :], axis=2)
        if m.kind == "point_set":
            d = np.linalg.norm(C[:, None, :] - X[None, :, :], axis=2)
            return np.where(d <= TOL.on_manifold, 0.0, np.inf)
        if m.kind == "torus":
            return self._torus_center_distances(X)
        raise NotImplementedError(m.kind)

    def _torus_center_distances(self, X):
        theta_grid, phi_grid, fields = self._torus_fields
        nt, nphi = theta_grid.size, phi_grid.size
        rho = np.hypot(X[:, 0], X[:, 1])
        theta = np.arctan2(
            X[:, 2] / self.manifold.r_minor,
            (rho - self.manifold.r_major) / self.manifold.r_minor,
        ) % (2 * np.pi)
        phi = np.arctan2(X[:, 1], X[:, 0]) % (2 * np.pi)
        ft = theta / (2 * np.pi) * nt
        fp = phi / (2 * np.pi) * nphi
        i0 = np.floor(ft).astype(int) % nt
        j0 = np.floor(fp).astype(int) % nphi
        i1, j1 = (i0 + 1) % nt, (j0 + 1) % nphi
        a, b = ft - np.floor(ft), fp - np.floor(fp)
        return (
            fields[:, i0, j0] * (1 - a) * (1 - b)
            + fields[:, i1, j0] * a * (1 - b)
            + fields[:, i0, j1] * (1 - a) * b
            + fields[:, i1, j1] * a * b
        )

    # -- partition of unity -------------------------------------------------

    def bump_values(self, X: np.ndarray) -> np.ndarray:
        """(C, n) unnormalized mollifier values."""
        if self.manifold.kind == "point_set":
            d = self.center_distances(X)
            return np.where(np.isfinite(d), 1.0, 0.0)
        return _mollifier(self.center_distances(X) / self.support_radius)

    def partition_values(self, X: np.ndarray) -> np.ndarray:
        """(C, n) values of the partition of unity at manifold points."""
        psi = self.bump_values(X)
        total = psi.sum(axis=0)
        if np.any(total <= 0.0):
            raise InvalidRadius(
                "partition of unity vanished at a manifold point; "
                "the covering net is too coarse for the chart radius"
            )
        return psi / total[None, :]


def build_atlas(manifold: EmbeddedManifold, radius: float, *, grid_level: int = 1,
                net_fraction: float = 0.7) -> Atlas:
    """Cover the manifold by geodesic balls of the given radius.

    Chart centers come from a greedy farthest-point net over a dense
    quadrature grid; the net is stopped once every grid node lies within
    ``net_fraction * radius`` of a center, leaving margin for the mollifier
    partition to stay positive between nodes.
    """
    r = float(radius)
    if not (0.0 < r < np.pi * manifold.reach):
        raise InvalidRadius(
            f"chart radius must lie in (0, pi*tau) = (0, {np.pi * manifold.reach:.6g})"
        )

    if manifold.kind == "linear_subspace":
        center = np.zeros(manifold.ambient_dim)
        chart = Chart(0, center, r, manifold.tangent_frame(center), manifold)
        return Atlas(manifold, [chart], r)

    if manifold.kind == "point_set":
        charts = [
            Chart(i, p.copy(), r, np.zeros((manifold.ambient_dim, 0)), manifold)
            for i, p in enumerate(manifold.points)
        ]
        return Atlas(manifold, charts, r)

    nodes, _ = manifold.quadrature(grid_level)
    n = nodes.shape[0]

    torus_graph = None
    if manifold.kind == "torus":
        torus_graph = _torus_grid_graph(manifold, grid_level)

    def dist_from(idx):
        if manifold.kind in ("circle", "sphere"):
            c = np.clip(nodes @ nodes[idx] / manifold.radius**2, -1.0, 1.0)
            return manifold.radius * np.arccos(c)
        graph, shape = torus_graph
        return dijkstra(graph, indices=idx)

    net_radius = net_fraction * r
    d_min = np.full(n, np.inf)
    center_idx = [0]
    d_min = np.minimum(d_min, dist_from(0))
    while d_min.max() > net_radius:
        nxt = int(np.argmax(d_min))
        center_idx.append(nxt)
        d_min = np.minimum(d_min, dist_from(nxt))

    # require the grid fine enough that off-grid points stay inside supports
    gap = _grid_gap_bound(manifold, grid_level)
    if net_radius + 2.0 * gap > 0.97 * r:
        raise InvalidRadius(
            f"covering grid too coarse (gap bound {gap:.4g}) for chart radius {r:.4g}; "
            "increase grid_level"
        )

    charts = [
        Chart(k, nodes[i].copy(), r, manifold.tangent_frame(nodes[i]), manifold)
        for k, i in enumerate(center_idx)
    ]

    torus_fields = None
    if manifold.kind == "torus":
        graph, (nt, nphi) = torus_graph
        fields = dijkstra(graph, indices=center_idx).reshape(len(center_idx), nt, nphi)
        theta = 2 * np.pi * np.arange(nt) / nt
        phi = 2 * np.pi * np.arange(nphi) / nphi
        torus_fields = (theta, phi, fields)

    atlas = Atlas(manifold, charts, r, torus_fields=torus_fields)
    # covering check on the build grid
    cover = atlas.center_distances(nodes).min(axis=0)
    if cover.max() > net_radius + 1e-9:
        raise InvalidRadius("internal covering check failed")
    return atlas


def _grid_gap_bound(manifold, grid_level):
    if manifold.kind == "circle":
        n = 256 << grid_level
        return np.pi * manifold.radius / n
    if manifold.kind == "sphere":
        n_azim = 32 << grid_level
        # azimuthal spacing at the equator dominates; polar GL nodes are denser
        return manifold.radius * (2 * np.pi / n_azim)
    if manifold.kind == "torus":
        nt, nphi = 24 << grid_level, 48 << grid_level
        return 0.5 * np.hypot(
            2 * np.pi * manifold.r_minor / nt,
            2 * np.pi * (manifold.r_major + manifold.r_minor) / nphi,
        )
    return 0.0


def _torus_grid_graph(manifold: Torus, grid_level: int):
    nt, nphi = 24 << grid_level, 48 << grid_level
    theta = 2 * np.pi * np.arange(nt) / nt
    phi = 2 * np.pi * np.arange(nphi) / nphi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    w = manifold.r_major + manifold.r_minor * np.cos(T)
    pts = np.stack(
        [w * np.cos(P), w * np.sin(P), manifold.r_minor * np.sin(T)], axis=-1
    ).reshape(-1, 3)
    idx = np.arange(nt * nphi).reshape(nt, nphi)
    rows, cols = [], []
    for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
        nb = np.roll(np.roll(idx, -di, axis=0), -dj, axis=1)
        rows.append(idx.ravel())
        cols.append(nb.ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    lengths = np.linalg.norm(pts[rows] - pts[cols], axis=1)
    graph = coo_matrix((lengths, (rows, cols)), shape=(nt * nphi, nt * nphi))
    graph = graph + graph.T
    return graph.tocsr(), (nt, nphi)


# ---------------------------------------------------------------------------


def low_dim_representation(atlas: Atlas, k: int, x, t: float) -> np.ndarray:
    """Chart coordinates of the rescaled projection: Log_k(Pi(x, t)/alpha_t).

    The d-dimensional feature the score network consumes; smooth in x away
    from the reach boundary.
    """
    chart = atlas.charts[k]
    a = _alpha(t)
    proj = atlas.manifold.project(x, t)
    return chart.log(proj / a)


def projection_jacobian_apply(manifold: EmbeddedManifold, x, t: float = 0.0,
                              step: float = TOL.jacobian_fd_step) -> np.ndarray:
    """Central finite-difference J_Pi(x) applied to the residual x - Pi(x).

    The projection Jacobian annihilates the residual direction, so the norm
    of the returned vector is a pure discretization error.
    """
    x = np.asarray(x, dtype=np.float64)
    D = manifold.ambient_dim
    residual = x - manifold.project(x, t)
    J = np.empty((D, D))
    for i in range(D):
        dx = np.zeros(D)
        dx[i] = step
        J[:, i] = (manifold.project(x + dx, t) - manifold.project(x - dx, t)) / (2 * step)
    return J @ residual
