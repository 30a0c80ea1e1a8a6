"""Periodic lattice geometry, node fields, flux laws and the discrete norms.

The domain is the unit torus ``[0, 1)^d`` with ``n`` cells per axis; node ``i``
sits at ``x_i = i * dx`` and owns the cell of side ``dx`` centred on it.  All
norms are normalised by the cell volume so that a constant field ``c`` has
``l^p`` norm ``|c|`` for every ``p``.

Field files
-----------
CSV layout (text)::

    d,n,dx,ncomp,kind
    <d>,<n>,<dx>,<ncomp>,<scalar|vector>
    <value>
    ...

followed by ``ncomp * n**d`` values, one per line, component-major and then
row-major over the lattice (last axis fastest), written with 17 significant
digits so the round trip is exact.

Binary layout (little endian)::

    b"RCF1" | int32 d | int32 n | int32 ncomp | int32 kind | float64 dx | float64 values...

with the same value ordering; ``kind`` is 0 for scalar and 1 for vector fields.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "VectorField",
    "FluxLaw",
    "lp_norm",
    "discrete_w1p",
    "shift",
    "lorentz_q1_norm",
    "conjugate_exponent",
    "save_field",
    "load_field",
]


class FieldError(ValueError):
    pass


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Periodic Cartesian lattice on the unit torus."""

    d: int
    n: int
    dt: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if not _is_pow2(int(self.n)) or self.n < 2:
            raise ValueError(f"cells per axis must be a power of two >= 2, got {self.n}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"time step must be positive, got {self.dt}")

    @classmethod
    def from_ratio(cls, d, n, ratio):
        """Grid with ``dt = ratio * dx``."""
        return cls(d, n, ratio / n)

    @property
    def dx(self):
        return 1.0 / self.n

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def size(self):
        return self.n**self.d

    @property
    def ratio(self):
        """``dt / dx``."""
        return self.dt * self.n

    @property
    def cell_volume(self):
        return self.dx**self.d

    def with_dt(self, dt):
        return GridSpec(self.d, self.n, dt)

    def coords(self):
        """Node coordinates, shape ``(d, n, ..., n)``."""
        x = np.arange(self.n) * self.dx
        return np.stack(np.meshgrid(*([x] * self.d), indexing="ij"))

    def wavenumbers(self):
        """Integer wavenumbers per axis, shape ``(d, n, ..., n)`` (FFT ordering)."""
        m = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return np.stack(np.meshgrid(*([m] * self.d), indexing="ij"))


def _frozen(values, shape, what):
    arr = np.array(values, dtype=np.float64)
    if arr.shape != shape:
        try:
            arr = arr.reshape(shape)
        except ValueError:
            raise FieldError(f"{what}: expected {int(np.prod(shape))} values, got {arr.size}") from None
    if not np.all(np.isfinite(arr)):
        raise FieldError("non-finite field")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.shape, "scalar field"))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid, fn):
        """Sample ``fn(*coords)`` at the nodes."""
        return cls(grid, fn(*grid.coords()))

    def with_values(self, values):
        return ScalarField(self.grid, values)

    def __neg__(self):
        return self.with_values(-self.values)

    def total(self):
        """Discrete integral ``dx^d * sum u_i``."""
        return self.grid.cell_volume * float(np.sum(self.values))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        shape = (self.grid.d,) + self.grid.shape
        object.__setattr__(self, "values", _frozen(self.values, shape, "vector field"))

    @classmethod
    def constant(cls, grid, vec):
        vec = np.broadcast_to(np.asarray(vec, dtype=float), (grid.d,))
        return cls(grid, np.broadcast_to(vec.reshape((grid.d,) + (1,) * grid.d), (grid.d,) + grid.shape))

    @classmethod
    def from_scalar(cls, u):
        """1D velocity from a scalar field."""
        if u.grid.d != 1:
            raise FieldError("from_scalar is only defined in 1D")
        return cls(u.grid, u.values[None])

    def component(self, k):
        return ScalarField(self.grid, self.values[k])

    def with_values(self, values):
        return VectorField(self.grid, values)

    def __neg__(self):
        return self.with_values(-self.values)

    def scaled(self, lam):
        return self.with_values(lam * self.values)


def _as_array(u):
    if isinstance(u, (ScalarField, VectorField)):
        return u.values, u.grid
    raise TypeError(f"expected a field, got {type(u).__name__}")


def conjugate_exponent(p):
    """Hölder conjugate ``p* = p / (p - 1)``."""
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def lp_norm(u, p):
    """Cell-normalised ``l^p`` norm; vector fields use the pointwise Euclidean length."""
    vals, grid = _as_array(u)
    if not np.all(np.isfinite(vals)):
        raise FieldError("non-finite field")
    if isinstance(u, VectorField):
        vals = np.sqrt(np.sum(vals**2, axis=0))
    vals = np.abs(vals)
    if math.isinf(p):
        return float(vals.max())
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float((grid.cell_volume * np.sum(vals**p)) ** (1.0 / p))


def discrete_w1p(a, p):
    """``(dx^d sum_i sum_k |a_i - a_{i+[1]_k}|^p)^(1/p)`` with periodic wrap."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    vals, grid = _as_array(a)
    if isinstance(a, ScalarField):
        vals = vals[None]
    total = 0.0
    for k in range(grid.d):
        diff = vals - np.roll(vals, -1, axis=1 + k)
        mag = np.sqrt(np.sum(diff**2, axis=0))
        total += np.sum(mag**p)
    return float((grid.cell_volume * total) ** (1.0 / p))


def shift(i, k, tau, n):
    """The multi-index ``i`` with coordinate ``k`` moved by ``tau`` (periodic)."""
    i = tuple(int(c) for c in i)
    if not 0 <= k < len(i):
        raise ValueError(f"axis {k} out of range for a {len(i)}-index")
    out = list(i)
    out[k] = (out[k] + tau) % n
    return tuple(out)


def lorentz_q1_norm(u, q):
    """Exact ``L^{q,1}`` norm ``int_0^inf |{u >= xi}|^(1/q) dxi`` of a lattice density."""
    if q <= 1:
        raise ValueError(f"q must be > 1, got {q}")
    vals = np.asarray(u.values, dtype=float).ravel()
    if np.any(vals < 0):
        raise FieldError("Lorentz norm defined for nonnegative u")
    v = np.sort(vals)[::-1]
    drops = v - np.append(v[1:], 0.0)
    m = np.arange(1, v.size + 1) * u.grid.cell_volume
    return float(np.sum(m ** (1.0 / q) * drops))


@dataclass(frozen=True)
class FluxLaw:
    """Scalar non-linearity ``f`` with ``f(0) = 0``.

    ``lip`` bounds ``|f'|`` on ``[u_min, u_max]``, the state range the law is
    declared for.  ``kinks`` lists points where ``f'`` jumps so quadratures
    can split there.
    """

    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    lip: float
    kind: str
    u_min: float = 0.0
    u_max: float = 1.0
    kinks: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(float(self.f(np.array(0.0)))) > 1e-14:
            raise ValueError("flux must be normalised so that f(0) = 0")
        xs = np.linspace(self.u_min, self.u_max, 257)
        fx = self.f(xs)
        slopes = np.abs(np.diff(fx) / np.diff(xs))
        if np.any(slopes > self.lip * (1 + 1e-9) + 1e-12):
            raise ValueError(f"declared Lipschitz bound {self.lip} violated on [{self.u_min}, {self.u_max}]")

    @classmethod
    def linear(cls, u_min=-1.0, u_max=1.0):
        return cls(lambda u: np.asarray(u, dtype=float) * 1.0,
                   lambda u: np.ones_like(np.asarray(u, dtype=float)),
                   1.0, "linear", u_min, u_max)

    @classmethod
    def burgers(cls, u_max=1.0, u_min=0.0):
        lip = max(abs(u_min), abs(u_max))
        return cls(lambda u: 0.5 * np.asarray(u, dtype=float) ** 2,
                   lambda u: np.asarray(u, dtype=float) * 1.0,
                   lip, "burgers", u_min, u_max)

    @classmethod
    def logistic(cls, uc=1.0):
        """``f(u) = u (uc - u)_+`` on ``[0, uc]``."""

        def f(u):
            u = np.asarray(u, dtype=float)
            return u * np.maximum(uc - u, 0.0)

        def fp(u):
            u = np.asarray(u, dtype=float)
            return np.where(u < uc, uc - 2.0 * u, 0.0)

        return cls(f, fp, float(uc), "logistic", 0.0, float(uc), kinks=(float(uc),), params={"uc": float(uc)})

    @classmethod
    def piecewise_linear(cls, knots, values, u_min=None, u_max=None):
        """Interpolate ``values`` at ``knots``; extrapolates with the end slopes."""
        xs = np.asarray(knots, dtype=float)
        ys = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise ValueError("knots must be strictly increasing with at least two entries")
        slopes = np.diff(ys) / np.diff(xs)

        def f(u):
            u = np.asarray(u, dtype=float)
            idx = np.clip(np.searchsorted(xs, u, side="right") - 1, 0, xs.size - 2)
            return ys[idx] + slopes[idx] * (u - xs[idx])

        def fp(u):
            u = np.asarray(u, dtype=float)
            idx = np.clip(np.searchsorted(xs, u, side="right") - 1, 0, xs.size - 2)
            return slopes[idx]

        lo = xs[0] if u_min is None else u_min
        hi = xs[-1] if u_max is None else u_max
        return cls(f, fp, float(np.max(np.abs(slopes))), "piecewise-linear", float(lo), float(hi),
                   kinks=tuple(xs[1:-1]), params={"knots": xs.tolist(), "values": ys.tolist()})

    def fprime_range(self, lo, hi, samples=129):
        """Sampled ``(min f', max f')`` over ``[lo, hi]`` including the kinks."""
        pts = np.linspace(lo, hi, samples)
        kinks = [k for k in self.kinks if lo <= k <= hi]
        if kinks:
            eps = 1e-12 * max(1.0, abs(hi - lo))
            pts = np.concatenate([pts, np.array(kinks) - eps, np.array(kinks) + eps])
        vals = self.fprime(pts)
        return float(np.min(vals)), float(np.max(vals))

    def probe_states(self):
        """Three states inside the declared range where ``f`` is non-zero."""
        lo, hi = self.u_min, self.u_max
        cand = lo + (hi - lo) * np.array([0.2, 0.35, 0.5, 0.65, 0.8, 0.9])
        cand = cand[np.abs(self.f(cand)) > 1e-8 * max(self.lip, 1.0)]
        if cand.size < 3:
            raise ValueError("flux vanishes on too much of its range to probe")
        return tuple(float(c) for c in cand[:3])


_MAGIC = b"RCF1"


def _field_layout(fld):
    if isinstance(fld, VectorField):
        return fld.grid.d, fld.values.reshape(fld.grid.d, -1)
    return 1, fld.values.reshape(1, -1)


def save_field(fld, path, fmt=None):
    """Write a field in the CSV or binary layout described in the module docstring."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    ncomp, flat = _field_layout(fld)
    g = fld.grid
    if fmt == "csv":
        kind = "vector" if isinstance(fld, VectorField) else "scalar"
        lines = ["d,n,dx,ncomp,kind", f"{g.d},{g.n},{g.dx!r},{ncomp},{kind}"]
        lines.extend(f"{v:.17g}" for v in flat.ravel())
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "bin":
        header = _MAGIC + struct.pack("<iiiid", g.d, g.n, ncomp, int(isinstance(fld, VectorField)), g.dx)
        path.write_bytes(header + flat.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown field format {fmt!r}")
    return path


def load_field(path, dt=1.0, fmt=None):
    """Read a field written by :func:`save_field`.  Files carry no time step."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    if fmt == "csv":
        lines = path.read_text().split()
        if lines[0].strip() != "d,n,dx,ncomp,kind":
            raise FieldError(f"{path}: bad header")
        d, n, dx, ncomp, kind = lines[1].split(",")
        d, n, ncomp, is_vec = int(d), int(n), int(ncomp), kind.strip() == "vector"
        vals = np.array([float(v) for v in lines[2:]])
    else:
        raw = path.read_bytes()
        if raw[:4] != _MAGIC:
            raise FieldError(f"{path}: bad magic")
        d, n, ncomp, is_vec, dx = struct.unpack("<iiiid", raw[4:28])
        vals = np.frombuffer(raw[28:], dtype="<f8").astype(float)
    grid = GridSpec(d, n, dt)
    if abs(float(dx) - grid.dx) > 1e-15:
        raise FieldError(f"{path}: dx {dx} inconsistent with n={n}")
    if vals.size != ncomp * grid.size:
        raise FieldError(f"{path}: expected {ncomp * grid.size} values, found {vals.size}")
    if not is_vec:
        if ncomp != 1:
            raise FieldError(f"{path}: scalar field with {ncomp} components")
        return ScalarField(grid, vals)
    if ncomp != d:
        raise FieldError(f"{path}: {ncomp} components on a {d}D grid")
    return VectorField(grid, vals)
