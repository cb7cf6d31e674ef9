"""Holomorphic extension of boundary traces along the discs of a family.

For every disc the trace ``psi -> f(g_t(e^{i psi}))`` is expanded in a Fourier
series. Its non-negative half is the Taylor data of the extension ``F(., t)``;
the negative half is the obstruction, measured in the l2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .family import DiscFamily
from .numerics import ConfigurationError, DomainError, poly_derivative, poly_eval

EXTENSION_RTOL = 1e-8


class SingularFunction(ArithmeticError):
    """The boundary function is not finite somewhere on the sampled boundary."""


class NoExtension(ValueError):
    """Evaluation of an extension at a parameter where the trace does not extend."""


# ---------------------------------------------------------------------------
# boundary functions


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """A function on ``C^n`` sampled at points ``z`` of shape ``(..., n)``.

    ``dbar`` returns the anti-holomorphic gradient ``(..., n)`` when a closed form
    is known; otherwise callers fall back to finite differences.
    """

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    dbar: Callable[[np.ndarray], np.ndarray] | None = None
    smoothness_note: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        with np.errstate(all="ignore"):
            return np.asarray(self.evaluator(z), dtype=complex) * np.ones(z.shape[:-1])

    def dbar_at(self, z, h: float | None = None) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.dbar is not None:
            with np.errstate(all="ignore"):
                return np.asarray(self.dbar(z), dtype=complex) * np.ones(z.shape)
        return dbar_fd(self, z, h)


def dbar_fd(f: Callable, z: np.ndarray, h: float | None = None) -> np.ndarray:
    """Central-difference ``d f / d conj(z_j)`` in the real coordinates of each ``z_j``."""
    z = np.asarray(z, dtype=complex)
    if h is None:
        h = 1e-5 * max(1.0, float(np.max(np.abs(z))) if z.size else 1.0)
    out = np.empty(z.shape, dtype=complex)
    for j in range(z.shape[-1]):
        e = np.zeros(z.shape[-1], dtype=complex)
        e[j] = h
        dx = (f(z + e) - f(z - e)) / (2.0 * h)
        dy = (f(z + 1j * e) - f(z - 1j * e)) / (2.0 * h)
        out[..., j] = 0.5 * (dx + 1j * dy)
    return out


def dz_fd(f: Callable, z: np.ndarray, h: float | None = None) -> np.ndarray:
    """Central-difference ``d f / d z_j``."""
    z = np.asarray(z, dtype=complex)
    if h is None:
        h = 1e-5 * max(1.0, float(np.max(np.abs(z))) if z.size else 1.0)
    out = np.empty(z.shape, dtype=complex)
    for j in range(z.shape[-1]):
        e = np.zeros(z.shape[-1], dtype=complex)
        e[j] = h
        dx = (f(z + e) - f(z - e)) / (2.0 * h)
        dy = (f(z + 1j * e) - f(z - 1j * e)) / (2.0 * h)
        out[..., j] = 0.5 * (dx - 1j * dy)
    return out


def _first(z):
    return z[..., 0]


def _dbar_only_first(values_fn):
    def dbar(z):
        out = np.zeros(z.shape, dtype=complex)
        out[..., 0] = values_fn(z[..., 0])
        return out
    return dbar


_EXPR_NAMESPACE = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "exp", "log", "sqrt", "abs", "conj", "real", "imag", "pi",
    "sinh", "cosh", "tanh", "arctan", "arctan2", "angle", "e")}


def _expression(source: str) -> BoundaryFunction:
    code = compile(source, "<expr>", "eval")
    allowed = set(_EXPR_NAMESPACE) | {"x", "y", "z", "zbar", "x1", "y1", "x2", "y2",
                                      "z1", "z2", "z1bar", "z2bar", "i", "j"}
    unknown = set(code.co_names) - allowed
    if unknown:
        raise ConfigurationError(f"unknown names in expression: {sorted(unknown)}")

    def evaluator(z):
        env = dict(_EXPR_NAMESPACE)
        env["i"] = env["j"] = 1j
        z1 = z[..., 0]
        env.update(z=z1, zbar=np.conj(z1), x=z1.real, y=z1.imag, z1=z1, z1bar=np.conj(z1),
                   x1=z1.real, y1=z1.imag)
        if z.shape[-1] > 1:
            z2 = z[..., 1]
            env.update(z2=z2, z2bar=np.conj(z2), x2=z2.real, y2=z2.imag)
        return eval(code, {"__builtins__": {}}, env)

    return BoundaryFunction("expr:" + source, evaluator, None, "user expression", {"source": source})


def make_function(name: str, **params) -> BoundaryFunction:
    """Catalog lookup: ``z_sq``, ``zbar``, ``globevnik_n``, ``abs_z1_sq``, ``const``, ``expr:...``."""
    if name.startswith("expr:"):
        return _expression(name[len("expr:"):].strip())
    if name == "z_sq":
        return BoundaryFunction("z_sq", lambda z: _first(z) ** 2,
                                lambda z: np.zeros(z.shape, dtype=complex), "entire")
    if name == "zbar":
        return BoundaryFunction("zbar", lambda z: np.conj(_first(z)),
                                _dbar_only_first(lambda w: np.ones_like(w)), "anti-holomorphic")
    if name == "globevnik_n":
        n = int(params.get("n", 2))
        return BoundaryFunction(
            "globevnik_n", lambda z: _first(z) ** n / np.conj(_first(z)),
            _dbar_only_first(lambda w: -w ** n / np.conj(w) ** 2),
            "real-analytic off the origin", {"n": n})
    if name == "abs_z1_sq":
        return BoundaryFunction("abs_z1_sq", lambda z: np.abs(_first(z)) ** 2,
                                _dbar_only_first(lambda w: w), "real polynomial")
    if name == "const":
        value = complex(params.get("value", 1.0))
        return BoundaryFunction("const", lambda z: np.full(z.shape[:-1], value, dtype=complex),
                                lambda z: np.zeros(z.shape, dtype=complex), "constant",
                                {"value": [value.real, value.imag]})
    raise ConfigurationError(f"unknown boundary function {name!r}")


FUNCTION_CATALOG = {
    "abs_z1_sq": "|z1|^2, constant on Hopf circles but not CR on the sphere",
    "const": "constant function (parameter value)",
    "expr:<source>": "numpy expression in x, y, z, zbar or x1, y1, x2, y2, z1, z2",
    "globevnik_n": "z^n / conj(z), extends along rotating circles with R <= r",
    "z_sq": "z^2",
    "zbar": "conj(z)",
}


# ---------------------------------------------------------------------------
# extension field


@dataclass(frozen=True, eq=False)
class ExtensionField:
    """Per-node Fourier data of the boundary trace of ``f`` on every disc.

    ``spectrum`` has shape ``params.shape + (N,)`` with modes ``-N/2 .. N/2-1``.
    """

    family: DiscFamily
    spectrum: np.ndarray
    residual_t: np.ndarray
    rms_t: np.ndarray
    size: int
    function_name: str = ""
    dt_spectrum: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_taylor(cls, family: DiscFamily, coeffs, size: int | None = None) -> "ExtensionField":
        """Extension given directly by node Taylor data ``params.shape + (K,)``."""
        coeffs = np.asarray(coeffs, dtype=complex)
        if size is None:
            size = max(8, 2 * coeffs.shape[-1] + (coeffs.shape[-1] % 2))
            size += size % 2
        if coeffs.shape[-1] > size // 2:
            raise ConfigurationError("too many Taylor coefficients for the circle grid")
        spec = np.zeros(family.params.shape + (size,), dtype=complex)
        spec[..., size // 2: size // 2 + coeffs.shape[-1]] = coeffs
        trace = np.fft.ifft(np.fft.ifftshift(spec, axes=-1), axis=-1) * size
        rms = np.sqrt(np.mean(np.abs(trace) ** 2, axis=-1))
        return cls(family, spec, np.zeros(family.params.shape), rms, size, "synthetic")

    @property
    def residual(self) -> float:
        """Largest l2 norm of negative modes over all (deduplicated) nodes."""
        return float(np.max(self.residual_t[self.family.params.valid_mask]))

    @cached_property
    def holds_t(self) -> np.ndarray:
        return self.residual_t <= EXTENSION_RTOL * self.rms_t

    @property
    def holds(self) -> bool:
        return bool(np.all(self.holds_t[self.family.params.valid_mask]))

    @cached_property
    def taylor_data(self) -> np.ndarray:
        return self.spectrum[..., self.size // 2:]

    @cached_property
    def dzeta_data(self) -> np.ndarray:
        return poly_derivative(self.taylor_data)

    @cached_property
    def dt_data(self) -> np.ndarray:
        """``params.shape + (ndim, K)``.

        From the chain-rule trace when available, otherwise by differentiating
        the node data along the parameter grid.
        """
        if self.dt_spectrum is not None:
            return self.dt_spectrum[..., self.size // 2:]
        return self.family.params.differentiate(self.taylor_data)

    @cached_property
    def boundary_trace(self) -> np.ndarray:
        """Samples of ``f o G`` on the boundary grid, including any obstruction."""
        return np.fft.ifft(np.fft.ifftshift(self.spectrum, axes=-1), axis=-1) * self.size

    def boundary_points(self) -> np.ndarray:
        return self.family.boundary_points(self.size)

    def _require(self, t):
        params = self.family.params
        if self.holds:
            return
        if params.kind == "box3":
            raise NoExtension("no extension at some node of the family")
        w, _ = params._axis_weights(params.check(t))
        bad = np.flatnonzero((np.abs(w) > 1e-14) & ~self.holds_t)
        if bad.size:
            raise NoExtension(f"no extension at t={params.nodes[bad[0]]:.6g} "
                              f"(residual {self.residual_t[bad[0]]:.3g})")

    def _check_zeta(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        if np.any(np.abs(zeta) > 1.0 + 1e-12):
            raise DomainError("extensions are evaluated on |zeta| <= 1")
        return zeta

    def eval(self, zeta, t):
        self._require(t)
        coeffs, _ = self.family.params.interpolate(self.taylor_data, t)
        return poly_eval(coeffs, self._check_zeta(zeta))

    def d_zeta(self, zeta, t):
        self._require(t)
        coeffs, _ = self.family.params.interpolate(self.taylor_data, t)
        return poly_eval(poly_derivative(coeffs), self._check_zeta(zeta))

    def d_t(self, zeta, t):
        self._require(t)
        _, grad = self.family.params.interpolate(self.taylor_data, t)
        out = poly_eval(grad, self._check_zeta(zeta))
        return out[0] if self.family.params.ndim == 1 else np.moveaxis(out, 0, -1)


def analyze(f: BoundaryFunction, family: DiscFamily, size: int = 256) -> ExtensionField:
    """Split the boundary trace of ``f`` on each disc into extension and obstruction."""
    if size < 8 or size % 2:
        raise ConfigurationError("circle grid size must be even and >= 8")
    zeta = family.boundary_points(size)
    z = np.moveaxis(family.grid_values(zeta), -2, -1)  # params + (N, n)
    trace = f(z)
    bad = ~np.isfinite(trace)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        node = tuple(idx[:-1])
        t = family.params.nodes[node]
        raise SingularFunction(f"function singular on the boundary: zeta={zeta[idx[-1]]:.6g}, "
                               f"t={np.round(t, 6).tolist()}")
    spectrum = np.fft.fftshift(np.fft.fft(trace, axis=-1), axes=-1) / size
    residual = np.sqrt(np.sum(np.abs(spectrum[..., : size // 2]) ** 2, axis=-1))
    rms = np.sqrt(np.mean(np.abs(trace) ** 2, axis=-1))
    dt_spectrum = None
    if family.exact_dt is not None:
        # d/dt (f o G) = df . G_t + dbar f . conj(G_t), with exact G_t
        gt = np.moveaxis(family.grid_d_t(zeta), -2, -1)  # params + (ndim, N, n)
        df = dz_fd(f, z)[..., None, :, :]
        dbf = f.dbar_at(z)[..., None, :, :]
        trace_t = np.sum(df * gt + dbf * np.conj(gt), axis=-1)
        dt_spectrum = np.fft.fftshift(np.fft.fft(trace_t, axis=-1), axes=-1) / size
    return ExtensionField(family, spectrum, residual, rms, size, f.name, dt_spectrum)


def moment_test(f: BoundaryFunction, family: DiscFamily, num_forms: int, size: int = 256,
                normalize: bool = False) -> float:
    """Largest ``|integral of f omega|`` over boundary circles and monomial forms.

    The forms are ``z^m dz`` (planar) or ``z1^a z2^b dz_j`` with ``a + b <= num_forms``.
    With ``normalize`` each moment is divided by the integral of ``|f omega|``,
    which removes the growth of high powers on large circles from the comparison.
    """
    zeta = family.boundary_points(size)
    z = family.grid_values(zeta)  # params + (n, N)
    dz = family.grid_d_zeta(zeta) * (1j * zeta) * (2.0 * np.pi / size)
    values = f(np.moveaxis(z, -2, -1))
    if not np.all(np.isfinite(values)):
        raise SingularFunction("function singular on the boundary")
    valid = family.params.valid_mask
    worst = 0.0
    n = family.ambient_dim
    if n == 1:
        exponents = [(m,) for m in range(num_forms + 1)]
    else:
        exponents = [(a, b) for a in range(num_forms + 1) for b in range(num_forms + 1 - a)]
    for alpha in exponents:
        mono = np.ones_like(values)
        for j, a in enumerate(alpha):
            mono = mono * z[..., j, :] ** a
        for j in range(n):
            terms = values * mono * dz[..., j, :]
            moments = np.sum(terms, axis=-1)
            if normalize:
                mass = np.sum(np.abs(terms), axis=-1)
                moments = np.where(mass > 0, moments / np.where(mass > 0, mass, 1.0), 0.0)
            worst = max(worst, float(np.max(np.abs(moments[valid]))))
    return worst
