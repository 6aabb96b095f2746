"""Periodic grids and spectrally accurate calculus on the unit torus.

Conventions
-----------
The domain is Q = (-1/2, 1/2)^d with unit period.  Node j in
{0, ..., n-1}^d sits at x = -1/2 + j*h with h = 1/n, and fields are
stored row-major (last index fastest).  Fourier modes live on the
integer lattice m in {-n/2, ..., n/2 - 1}^d with the transform pair

    u(x) = sum_m c_m exp(2 pi i m.x),      c_m = uhat_m / n^d,

where ``uhat`` is in numpy FFT layout.  Derivative multipliers:

    gradient, direction j : 2 pi i m_j   (Nyquist zeroed: odd derivative)
    laplacian             : -4 pi^2 |m|^2  (Nyquist kept: even derivative)

Integrals use the periodic rectangle rule h^d * sum over nodes, which is
spectrally accurate for smooth integrands.  Norm and measure reductions
accumulate in row-major node order so repeated runs are bit-identical.

Fields are immutable after construction; workspaces are read-only after
setup and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .backend import kernels
from .errors import ConfigError, DomainError, EvaluationError

_IMAG_TOL = 1e-12


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: d dimensions, n nodes per dimension, spacing h = 1/n."""

    d: int
    n: int

    def __post_init__(self):
        if not 1 <= self.d <= 3:
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 8 or not _is_power_of_two(self.n):
            raise ConfigError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def h(self) -> float:
        # exact: n is a power of two
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def node_count(self) -> int:
        return self.n**self.d

    def coords(self) -> list[np.ndarray]:
        """Node coordinates per axis, shaped for broadcasting."""
        x = -0.5 + self.h * np.arange(self.n)
        out = []
        for axis in range(self.d):
            shape = [1] * self.d
            shape[axis] = self.n
            out.append(x.reshape(shape))
        return out

    def refined(self, factor: int) -> "GridSpec":
        return GridSpec(self.d, factor * self.n)


def _first_nonfinite(values: np.ndarray):
    bad = ~np.isfinite(values)
    if bad.any():
        flat = int(np.argmax(bad.ravel()))
        return np.unravel_index(flat, values.shape)
    return None


class ScalarField:
    """Real grid function on the torus; values are frozen after construction."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: GridSpec, values: np.ndarray):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            raise ConfigError(
                f"values shape {values.shape} does not match grid shape {grid.shape}"
            )
        node = _first_nonfinite(values)
        if node is not None:
            raise EvaluationError(f"non-finite value at node {tuple(int(i) for i in node)}")
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def mean(self) -> float:
        return float(self.values.mean())

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


class VectorField:
    """d scalar components sharing one grid (carries gradients)."""

    __slots__ = ("grid", "components")

    def __init__(self, components: Sequence[ScalarField]):
        grid = components[0].grid
        if any(c.grid != grid for c in components):
            raise ConfigError("vector components must share one grid")
        if len(components) != grid.d:
            raise ConfigError(f"expected {grid.d} components, got {len(components)}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "components", tuple(components))

    def __setattr__(self, name, value):
        raise AttributeError("VectorField is immutable")

    def norm_sq_values(self) -> np.ndarray:
        """|p|^2 at the nodes."""
        stack = np.ascontiguousarray(
            np.stack([c.flat for c in self.components], axis=0)
        )
        return np.asarray(kernels.grad_norm_sq(stack)).reshape(self.grid.shape)


class HessianField:
    """Symmetric second-derivative collection: d(d+1)/2 components, i <= j."""

    __slots__ = ("grid", "_comps", "_index")

    def __init__(self, grid: GridSpec, comps: Sequence[ScalarField]):
        pairs = [(i, j) for i in range(grid.d) for j in range(i, grid.d)]
        if len(comps) != len(pairs):
            raise ConfigError("wrong number of Hessian components")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "_comps", tuple(comps))
        object.__setattr__(self, "_index", {p: k for k, p in enumerate(pairs)})

    def __setattr__(self, name, value):
        raise AttributeError("HessianField is immutable")

    def comp(self, i: int, j: int) -> ScalarField:
        if i > j:
            i, j = j, i
        return self._comps[self._index[(i, j)]]

    def trace_values(self) -> np.ndarray:
        out = self.comp(0, 0).values.copy()
        for i in range(1, self.grid.d):
            out += self.comp(i, i).values
        return out

    def frobenius_sq_values(self) -> np.ndarray:
        """|D^2 u|^2 = sum_ij (d_ij u)^2 at the nodes."""
        out = np.zeros(self.grid.shape)
        for i in range(self.grid.d):
            for j in range(i, self.grid.d):
                w = 1.0 if i == j else 2.0
                out += w * self.comp(i, j).values ** 2
        return out


class SpectrumWorkspace:
    """Precomputed wavenumber lattice and Fourier multipliers for one grid.

    Read-only after construction.  ``fine`` (built lazily) is the matching
    workspace on the factor-2 refined grid used for dealiased evaluation.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        n, d = grid.n, grid.d
        m1 = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)  # 0..n/2-1, -n/2..-1
        self.modes: list[np.ndarray] = []
        self.grad_mult: list[np.ndarray] = []
        self.hess_diag_mult: list[np.ndarray] = []
        lap = np.zeros(grid.shape)
        for axis in range(d):
            shape = [1] * d
            shape[axis] = n
            m = m1.reshape(shape)
            self.modes.append(m)
            g = 2j * np.pi * m.astype(np.float64)
            g[m == -n // 2] = 0.0  # odd derivative: Nyquist annihilated
            g.setflags(write=False)
            self.grad_mult.append(g)
            hd = -4.0 * np.pi**2 * m.astype(np.float64) ** 2
            hd.setflags(write=False)
            self.hess_diag_mult.append(hd)
            lap = lap - 4.0 * np.pi**2 * m.astype(np.float64) ** 2
        lap.setflags(write=False)
        self.lap_mult = lap
        self._fine: "SpectrumWorkspace | None" = None

    @property
    def fine(self) -> "SpectrumWorkspace":
        if self._fine is None:
            self._fine = SpectrumWorkspace(self.grid.refined(2))
        return self._fine

    # -- transforms -------------------------------------------------------

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values)

    def ifft_real(self, spectrum: np.ndarray, what: str = "field") -> np.ndarray:
        out = np.fft.ifftn(spectrum)
        re = np.ascontiguousarray(out.real)
        # scale against the transform magnitude, not the (possibly cancelled)
        # output: nodal values are bounded by sum|c_m|, and so is the roundoff,
        # which also grows slowly with the transform size; |Re|+|Im| bounds the
        # modulus and avoids a hypot pass
        scale = max(
            1.0,
            float(np.abs(spectrum.real).sum() + np.abs(spectrum.imag).sum())
            / spectrum.size,
        )
        allowed = _IMAG_TOL * scale * max(1.0, 0.25 * np.log2(spectrum.size))
        imag_max = float(np.abs(out.imag).max())
        if imag_max > allowed:
            raise EvaluationError(
                f"{what}: imaginary residue {imag_max:.3e} exceeds "
                f"{allowed:.3e} after inverse transform"
            )
        return re


def require_same_grid(ws: SpectrumWorkspace, *fields: ScalarField) -> None:
    for f in fields:
        if f.grid != ws.grid:
            raise ConfigError(
                f"grid mismatch: field on n={f.grid.n}, d={f.grid.d} but "
                f"workspace on n={ws.grid.n}, d={ws.grid.d}"
            )


# -- spectral padding / truncation (factor 2) ------------------------------


def _embed_axis(spec: np.ndarray, axis: int) -> np.ndarray:
    """Zero-pad one axis n -> 2n in FFT layout, splitting the Nyquist bin."""
    n = spec.shape[axis]
    half = n // 2
    shape = list(spec.shape)
    shape[axis] = 2 * n
    out = np.zeros(shape, dtype=spec.dtype)

    def sl(dst, src):
        idx_dst = [slice(None)] * out.ndim
        idx_src = [slice(None)] * spec.ndim
        idx_dst[axis] = dst
        idx_src[axis] = src
        out[tuple(idx_dst)] = spec[tuple(idx_src)]

    sl(slice(0, half), slice(0, half))  # m = 0 .. n/2-1
    sl(slice(2 * n - half + 1, 2 * n), slice(half + 1, n))  # m = -n/2+1 .. -1
    # m = -n/2: split evenly between +n/2 and -n/2 on the fine lattice so
    # real fields stay exactly real
    idx_dst = [slice(None)] * out.ndim
    idx_src = [slice(None)] * spec.ndim
    idx_src[axis] = half
    nyq = spec[tuple(idx_src)] * 0.5
    idx_dst[axis] = half
    out[tuple(idx_dst)] = nyq
    idx_dst[axis] = 2 * n - half
    out[tuple(idx_dst)] = nyq
    return out


def _fold_axis(spec: np.ndarray, axis: int) -> np.ndarray:
    """Inverse of `_embed_axis`: restrict one axis 2n -> n, folding +-Nyquist."""
    n2 = spec.shape[axis]
    n = n2 // 2
    half = n // 2
    shape = list(spec.shape)
    shape[axis] = n
    out = np.zeros(shape, dtype=spec.dtype)

    def take(src):
        idx = [slice(None)] * spec.ndim
        idx[axis] = src
        return spec[tuple(idx)]

    def put(dst, val):
        idx = [slice(None)] * out.ndim
        idx[axis] = dst
        out[tuple(idx)] = val

    put(slice(0, half), take(slice(0, half)))
    put(slice(half + 1, n), take(slice(n2 - half + 1, n2)))
    put(half, take(half) + take(n2 - half))
    return out


def pad_spectrum(spec: np.ndarray) -> np.ndarray:
    """Embed a coarse spectrum into the factor-2 lattice, preserving node values."""
    out = spec
    for axis in range(spec.ndim):
        out = _embed_axis(out, axis)
    return out * (2**spec.ndim)


def truncate_spectrum(spec: np.ndarray) -> np.ndarray:
    """Project a fine spectrum back onto the coarse lattice (left inverse of pad)."""
    out = spec
    for axis in range(spec.ndim):
        out = _fold_axis(out, axis)
    return out / (2**spec.ndim)


# -- calculus ---------------------------------------------------------------


def gradient(u: ScalarField, ws: SpectrumWorkspace) -> VectorField:
    """Spectral gradient of the trigonometric interpolant of u."""
    require_same_grid(ws, u)
    uhat = ws.fft(u.values)
    comps = [
        ScalarField(u.grid, ws.ifft_real(g * uhat, what="gradient"))
        for g in ws.grad_mult
    ]
    return VectorField(comps)


def laplacian(u: ScalarField, ws: SpectrumWorkspace) -> ScalarField:
    """Spectral Laplacian; the zero mode is annihilated exactly."""
    require_same_grid(ws, u)
    uhat = ws.fft(u.values)
    return ScalarField(u.grid, ws.ifft_real(ws.lap_mult * uhat, what="laplacian"))


def hessian(u: ScalarField, ws: SpectrumWorkspace) -> HessianField:
    """All second derivatives d_ij u for i <= j; trace equals the Laplacian."""
    require_same_grid(ws, u)
    uhat = ws.fft(u.values)
    comps = []
    for i in range(u.grid.d):
        for j in range(i, u.grid.d):
            if i == j:
                mult = ws.hess_diag_mult[i]
            else:
                mult = ws.grad_mult[i] * ws.grad_mult[j]
            comps.append(ScalarField(u.grid, ws.ifft_real(mult * uhat, what="hessian")))
    return HessianField(u.grid, comps)


def lq_norm(u: ScalarField, q: float) -> float:
    """Lebesgue q-norm by the periodic rectangle rule: (h^d sum |u|^q)^(1/q)."""
    if not np.isfinite(q) or q < 1:
        raise DomainError(f"Lebesgue exponent must satisfy q >= 1, got {q}")
    total = kernels.abs_pow_sum(u.flat, float(q))
    return float((u.grid.h**u.grid.d * total) ** (1.0 / q))


def superlevel_measure(u: ScalarField, k: float) -> float:
    """|{u > k}| estimated as h^d times the strict node count."""
    cnt = kernels.count_above(u.flat, float(k))
    return float(u.grid.h**u.grid.d * cnt)


def nonlinear_eval(
    expr: Callable[..., np.ndarray],
    inputs: Sequence[ScalarField],
    oversample: int = 1,
) -> ScalarField:
    """Pointwise evaluation of `expr` with optional spectral oversampling.

    With ``oversample == 2`` the inputs are zero-padded in spectrum onto the
    factor-2 grid, `expr` is applied there, and the result is truncated back
    (the standard dealiasing treatment for non-polynomial nonlinearities).
    With factor 1 the expression is applied in place on the nodes.
    """
    if oversample not in (1, 2):
        raise DomainError(f"oversample factor must be 1 or 2, got {oversample}")
    if not inputs:
        raise ConfigError("nonlinear_eval needs at least one input field")
    grid = inputs[0].grid
    if any(f.grid != grid for f in inputs):
        raise ConfigError("nonlinear_eval inputs must share a grid")
    if oversample == 1:
        out = np.asarray(expr(*[f.values for f in inputs]), dtype=np.float64)
        return ScalarField(grid, out)  # construction checks finiteness
    ws = SpectrumWorkspace(grid)
    fine_vals = []
    for f in inputs:
        spec = pad_spectrum(ws.fft(f.values))
        fine_vals.append(ws.fine.ifft_real(spec, what="oversampled input"))
    out_fine = np.asarray(expr(*fine_vals), dtype=np.float64)
    node = _first_nonfinite(out_fine)
    if node is not None:
        raise EvaluationError(
            f"non-finite value at fine-grid node {tuple(int(i) for i in node)}"
        )
    back = truncate_spectrum(ws.fine.fft(out_fine))
    return ScalarField(grid, ws.ifft_real(back, what="dealiased result"))
