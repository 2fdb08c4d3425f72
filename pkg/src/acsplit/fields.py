"""Uniform periodic grid fields and FFT-diagonalized elliptic solves.

Everything spatial lives here: the grid convention (cell-centered samples on a
periodic square), the exact spectral Laplacian, screened-Poisson solves, and
the discrete norms used by the energy diagnostics.  All operators are Fourier
multipliers, so solves are exact up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FIELD_MAGIC = b"ACSF"
HEADER_BYTES = 16


class SingularSystemError(ValueError):
    """Raised when a zeroth-order-free solve is applied to data with nonzero mean."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform n-by-n periodic grid on a square of side `length`.

    Values are sampled at cell centers ((i+1/2)h, (j+1/2)h) with h = length/n,
    so that thresholding sign(u) never privileges a grid line.
    """

    n: int
    length: float = 1.0

    def __post_init__(self):
        if self.n < 8:
            raise ValueError(f"grid needs n >= 8, got {self.n}")
        if self.n % 2 != 0:
            raise ValueError(f"grid needs even n, got {self.n}")
        if not (self.length > 0):
            raise ValueError(f"grid length must be positive, got {self.length}")

    @property
    def h(self) -> float:
        return self.length / self.n

    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def meshgrid(self):
        x = self.cell_centers()
        return np.meshgrid(x, x, indexing="ij")

    def laplacian_symbol(self) -> np.ndarray:
        """|2 pi k / length|^2 on the rfft2 layout (the symbol of -Laplacian)."""
        kx = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        ky = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)
        return kx[:, None] ** 2 + ky[None, :] ** 2


@dataclass
class ScalarField:
    """Real values on a GridSpec; values[i, j] lives at ((i+1/2)h, (j+1/2)h)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"field shape {self.values.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def make_field(grid: GridSpec, f) -> ScalarField:
    """Sample a pointwise function f(x, y) at the cell centers."""
    X, Y = grid.meshgrid()
    vals = np.asarray(f(X, Y), dtype=np.float64)
    vals = np.broadcast_to(vals, (grid.n, grid.n)).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("make_field: sampled values are not all finite")
    return ScalarField(grid, vals)


def make_constant(grid: GridSpec, c: float) -> ScalarField:
    return ScalarField(grid, np.full((grid.n, grid.n), float(c)))


def make_circle(grid: GridSpec, radius: float, center=None) -> ScalarField:
    """Signed indicator 2*chi_B - 1 of the disc of given radius (default: centered)."""
    if center is None:
        center = (0.5 * grid.length, 0.5 * grid.length)
    cx, cy = center
    X, Y = grid.meshgrid()
    inside = (X - cx) ** 2 + (Y - cy) ** 2 <= radius**2
    return ScalarField(grid, np.where(inside, 1.0, -1.0))


@dataclass
class HelmholtzOperator:
    """The screened-Poisson operator (a - b*Laplacian) on a periodic grid.

    The spectral symbol a + b*|2 pi k/L|^2 is precomputed once; the operator is
    immutable afterwards and safe to share across workers.  a = 0 is allowed
    (pure -b*Laplacian); its zero mode is singular and handled by the solve.
    """

    grid: GridSpec
    a: float
    b: float
    symbol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("helmholtz coefficients must be nonnegative")
        if self.a + self.b <= 0:
            raise ValueError("helmholtz needs a + b > 0")
        self.symbol = self.a + self.b * self.grid.laplacian_symbol()

    def apply(self, u: ScalarField) -> ScalarField:
        _check_same_grid(u.grid, self.grid)
        vh = self.symbol * np.fft.rfft2(u.values)
        return ScalarField(self.grid, np.fft.irfft2(vh, s=u.values.shape))


def _check_same_grid(g1: GridSpec, g2: GridSpec):
    if g1 != g2:
        raise ValueError(f"grid mismatch: {g1} vs {g2}")


def laplacian(u: ScalarField) -> ScalarField:
    """Exact spectral Laplacian (Fourier multiplier -|2 pi k/L|^2 per mode)."""
    lam = u.grid.laplacian_symbol()
    vh = -lam * np.fft.rfft2(u.values)
    return ScalarField(u.grid, np.fft.irfft2(vh, s=u.values.shape))


def helmholtz_solve(op: HelmholtzOperator, rhs: ScalarField) -> ScalarField:
    """Solve (a - b*Laplacian) u = rhs exactly in Fourier space.

    With a = 0 the zero mode is singular: a rhs with nonzero mean raises
    SingularSystemError, otherwise the mean of the solution is fixed to zero.
    """
    _check_same_grid(rhs.grid, op.grid)
    rh = np.fft.rfft2(rhs.values)
    if op.a == 0.0:
        mean = rh[0, 0].real / rhs.grid.n**2
        scale = np.max(np.abs(rhs.values)) if rhs.values.size else 0.0
        if abs(mean) > 1e-13 * max(scale, 1.0):
            raise SingularSystemError(
                f"a=0 solve needs zero-mean rhs (mean={mean:.3e})"
            )
        sym = op.symbol.copy()
        sym[0, 0] = 1.0
        uh = rh / sym
        uh[0, 0] = 0.0
    else:
        uh = rh / op.symbol
    return ScalarField(op.grid, np.fft.irfft2(uh, s=rhs.values.shape))


def lp_norm(u: ScalarField, p: float) -> float:
    """Discrete L^p norm (h^2 sum |u|^p)^(1/p)."""
    if p < 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    h2 = u.grid.h**2
    if p == 2:
        return float(np.sqrt(h2 * np.sum(u.values**2)))
    return float((h2 * np.sum(np.abs(u.values) ** p)) ** (1.0 / p))


def l2_inner(u: ScalarField, v: ScalarField) -> float:
    _check_same_grid(u.grid, v.grid)
    return float(u.grid.h**2 * np.sum(u.values * v.values))


def h1_seminorm(u: ScalarField) -> float:
    """Spectral H^1 seminorm, Parseval-consistent with lp_norm(u, 2).

    Computed as sqrt(sum_k |2 pi k|^2 |u_hat_k|^2) with coefficient-normalized
    fft; the physical length cancels in two dimensions.
    """
    n = u.grid.n
    uh = np.fft.fft2(u.values) / n**2
    k = np.fft.fftfreq(n, d=1.0 / n)
    lam_int = (2.0 * np.pi) ** 2 * (k[:, None] ** 2 + k[None, :] ** 2)
    return float(np.sqrt(np.sum(lam_int * np.abs(uh) ** 2)))


def mean(u: ScalarField) -> float:
    return float(np.mean(u.values))


# -- serialization --------------------------------------------------------

def save_field(u: ScalarField, path) -> None:
    """Flat little-endian float64 dump, row-major, after a 16-byte header."""
    header = FIELD_MAGIC + np.uint32(u.grid.n).tobytes() + b"\x00" * 8
    assert len(header) == HEADER_BYTES
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(u.values.astype("<f8").tobytes(order="C"))


def load_field(path, length: float = 1.0) -> ScalarField:
    with open(path, "rb") as fh:
        header = fh.read(HEADER_BYTES)
        if len(header) != HEADER_BYTES or header[:4] != FIELD_MAGIC:
            raise ValueError(f"{path}: not a field file (bad magic)")
        n = int(np.frombuffer(header[4:8], dtype="<u4")[0])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError(f"{path}: expected {n * n} values, found {data.size}")
    return ScalarField(GridSpec(n, length), data.reshape(n, n).copy())


def field_to_csv(u: ScalarField, path) -> None:
    """Debug CSV export, one grid row per line."""
    np.savetxt(path, u.values, delimiter=",", fmt="%.17g")
