"""Pseudospectral calculus on flat tori.

Fields are numpy arrays whose leading axes are the grid shape; tensor
indices trail. Coordinates are lattice coordinates ``u`` in ``[0, 1)^n``
with ``x = B u``, so the flat metric in these coordinates is the constant
Gram matrix ``B^T B``. Metric fields passed to the curvature routines are
components in the same ``u`` coordinates and may vary over the grid.

The Laplacian follows the positive convention ``lap = -div grad``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class TorusSpec:
    """Flat torus ``R^n / B Z^n`` with a spin structure and sampling grid.

    ``lattice`` rows are rows of ``B`` (its columns generate the lattice),
    ``spin`` holds the mode shift in {0, 1/2} per dual basis direction.
    """

    lattice: tuple[tuple[float, ...], ...]
    spin: tuple[float, ...]
    grid: tuple[int, ...]

    def __post_init__(self):
        B = np.array(self.lattice, dtype=float)
        object.__setattr__(self, "lattice", tuple(tuple(float(v) for v in row) for row in B))
        object.__setattr__(self, "spin", tuple(float(s) for s in self.spin))
        object.__setattr__(self, "grid", tuple(int(N) for N in self.grid))
        n = B.shape[0]
        if B.shape != (n, n) or n < 1:
            raise ValueError(f"lattice basis must be square, got shape {B.shape}")
        if abs(np.linalg.det(B)) <= 1e-12:
            raise ValueError("lattice basis is singular")
        if len(self.spin) != n or any(s not in (0.0, 0.5) for s in self.spin):
            raise ValueError(f"spin structure must be {n} entries from {{0, 1/2}}, got {self.spin}")
        if len(self.grid) != n or any(N < 4 or N % 2 for N in self.grid):
            raise ValueError(f"grid must be {n} even integers >= 4, got {self.grid}")

    @classmethod
    def square(cls, n: int = 2, N: int = 16, spin=None) -> "TorusSpec":
        spin = (0.5,) + (0.0,) * (n - 1) if spin is None else spin
        return cls(tuple(map(tuple, np.eye(n))), tuple(spin), (N,) * n)

    def with_grid(self, N) -> "TorusSpec":
        grid = (N,) * self.n if np.isscalar(N) else tuple(N)
        return TorusSpec(self.lattice, self.spin, grid)

    @property
    def n(self) -> int:
        return len(self.grid)

    @property
    def basis(self) -> np.ndarray:
        return np.array(self.lattice)

    @property
    def metric(self) -> np.ndarray:
        """Constant flat metric in lattice coordinates, ``B^T B``."""
        B = self.basis
        return B.T @ B

    @property
    def frame(self) -> np.ndarray:
        """Orthonormal frame ``P = G^(-1/2)``; column ``i`` holds ``E_i`` in lattice coordinates."""
        w, V = np.linalg.eigh(self.metric)
        return (V / np.sqrt(w)) @ V.T

    @property
    def nodes(self) -> int:
        return int(np.prod(self.grid))

    @property
    def cell_volume(self) -> float:
        return abs(float(np.linalg.det(self.basis))) / self.nodes

    def points(self) -> np.ndarray:
        """Lattice coordinates of the cell-corner nodes, shape ``(*grid, n)``."""
        axes = [np.arange(N) / N for N in self.grid]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def wavenumbers(self, axis: int, shift: float = 0.0, nyquist: str = "zero") -> np.ndarray:
        """Angular wavenumbers ``2 pi (k + shift)`` in FFT order along one axis.

        ``nyquist='zero'`` drops the unpaired -N/2 mode (real scalar fields);
        ``'keep'`` retains it, which is what the spinor operators use.
        """
        N = self.grid[axis]
        k = np.fft.fftfreq(N, 1.0 / N) + shift
        if nyquist == "zero" and shift == 0.0:
            k[N // 2] = 0.0
        return 2.0 * np.pi * k


def _check_axis(spec: TorusSpec, axis: int):
    if not 0 <= axis < spec.n:
        raise ValueError(f"axis {axis} out of range for a {spec.n}-torus")


def spectral_partial(f, spec: TorusSpec, axis: int, shift: float = 0.0, nyquist: str = "zero"):
    """Fourier derivative of a grid field along lattice coordinate ``axis``.

    With ``shift`` the field is read as the periodic factor of
    ``exp(2 pi i shift u_axis) f`` and the derivative returned in the same form.
    """
    _check_axis(spec, axis)
    f = np.asarray(f)
    k = spec.wavenumbers(axis, shift, nyquist)
    shape = [1] * f.ndim
    shape[axis] = -1
    out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(f, axis=axis), axis=axis)
    if np.isrealobj(f) and shift == 0.0 and nyquist == "zero":
        return out.real
    return out


def frame_partial(f, spec: TorusSpec, i: int, shift=None, nyquist: str = "zero"):
    """Derivative along the orthonormal frame vector ``E_i``."""
    P = spec.frame
    shift = (0.0,) * spec.n if shift is None else shift
    out = 0.0
    for a in range(spec.n):
        if P[a, i] != 0.0:
            out = out + P[a, i] * spectral_partial(f, spec, a, shift[a], nyquist)
    if np.isscalar(out):
        return np.zeros_like(np.asarray(f))
    return out


def gradient_components(f, spec: TorusSpec):
    """Coordinate partials stacked on a trailing axis."""
    return np.stack([spectral_partial(f, spec, a) for a in range(spec.n)], axis=-1)


def as_metric_field(g, spec: TorusSpec) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    n = spec.n
    if g.shape == (n, n):
        g = np.broadcast_to(g, spec.grid + (n, n))
    if g.shape != spec.grid + (n, n):
        raise ValueError(f"metric field has shape {g.shape}, expected {spec.grid + (n, n)}")
    return g


def _check_spd(g: np.ndarray):
    if not np.allclose(g, np.swapaxes(g, -1, -2), atol=1e-12, rtol=0):
        raise ValueError("metric field is not symmetric")
    w = np.linalg.eigvalsh(g)
    if np.any(w <= 0):
        node = np.unravel_index(int(np.argmin(w.min(axis=-1))), g.shape[:-2])
        raise ValueError(f"metric is not positive-definite at node {tuple(int(i) for i in node)}")


def gradient(f, g, spec: TorusSpec):
    g = as_metric_field(g, spec)
    return np.einsum("...ab,...b->...a", np.linalg.inv(g), gradient_components(f, spec))


def divergence(V, g, spec: TorusSpec):
    g = as_metric_field(g, spec)
    vol = np.sqrt(np.linalg.det(g))
    flux = vol[..., None] * V
    return sum(spectral_partial(flux[..., a], spec, a) for a in range(spec.n)) / vol


def laplacian(f, g, spec: TorusSpec):
    """Positive Laplacian ``-div_g grad_g f``."""
    g = as_metric_field(g, spec)
    _check_spd(g)
    return -divergence(gradient(f, g, spec), g, spec)


def christoffel(g, spec: TorusSpec) -> np.ndarray:
    """Levi-Civita symbols ``Gamma[..., k, i, j]`` of a metric field."""
    g = as_metric_field(g, spec)
    _check_spd(g)
    ginv = np.linalg.inv(g)
    # dg[..., c, a, b] = d_c g_ab
    dg = np.stack([spectral_partial(g, spec, c) for c in range(spec.n)], axis=-3)
    lower = 0.5 * (
        np.einsum("...ijl->...lij", dg)
        + np.einsum("...jil->...lij", dg)
        - np.einsum("...lij->...lij", dg)
    )
    return np.einsum("...kl,...lij->...kij", ginv, lower)


def riemann(g, spec: TorusSpec) -> np.ndarray:
    """``R[..., r, s, m, v] = R^r_{s m v}``; sign chosen so round spheres have S > 0."""
    G = christoffel(g, spec)
    dG = np.stack([spectral_partial(G, spec, m) for m in range(spec.n)], axis=-4)
    # dG[..., m, r, v, s] = d_m Gamma^r_{v s}
    term = np.einsum("...mrvs->...rsmv", dG)
    quad = np.einsum("...rml,...lvs->...rsmv", G, G)
    return term - np.swapaxes(term, -1, -2) + quad - np.swapaxes(quad, -1, -2)


def scalar_curvature(g, spec: TorusSpec) -> np.ndarray:
    g = as_metric_field(g, spec)
    R = riemann(g, spec)
    ricci = np.einsum("...rsrv->...sv", R)
    return np.einsum("...sv,...sv->...", np.linalg.inv(g), ricci)


def covariant_derivative_sym2(beta, g, spec: TorusSpec) -> np.ndarray:
    """``out[..., i, j, k] = (nabla_i beta)_{jk}`` for a symmetric 2-tensor in coordinates."""
    beta = np.asarray(beta, dtype=float)
    n = spec.n
    if beta.shape != spec.grid + (n, n):
        raise ValueError(f"tensor field has shape {beta.shape}, expected {spec.grid + (n, n)}")
    G = christoffel(g, spec)
    d = np.stack([spectral_partial(beta, spec, i) for i in range(n)], axis=-3)
    return d - np.einsum("...mij,...mk->...ijk", G, beta) - np.einsum("...mik,...jm->...ijk", G, beta)


def spinor_density(psi) -> np.ndarray:
    """Pointwise ``(psi, psi) = Re <psi, psi>``."""
    psi = np.asarray(psi)
    return np.einsum("...a,...a->...", psi.conj(), psi).real


def lemma23_residual(F, psi, g, spec: TorusSpec) -> float:
    """Max-norm defect of ``F lap(rho) - rho lap(F) = div(rho grad F - F grad rho)``, ``rho = |psi|^2``."""
    F = np.asarray(F, dtype=float)
    psi = np.asarray(psi)
    if F.shape != spec.grid or psi.shape[:-1] != spec.grid:
        raise ValueError("F and psi must be sampled on the torus grid")
    rho = spinor_density(psi)
    lhs = F * laplacian(rho, g, spec) - rho * laplacian(F, g, spec)
    flux = rho[..., None] * gradient(F, g, spec) - F[..., None] * gradient(rho, g, spec)
    return float(np.abs(lhs - divergence(flux, g, spec)).max())


def integrate(f, spec: TorusSpec, weight=None) -> float:
    """Periodic trapezoid quadrature of ``f * weight`` against the flat volume."""
    f = np.asarray(f)
    if weight is not None:
        weight = np.asarray(weight)
        if np.any(weight < 0):
            warnings.warn("integration weight has negative entries", RuntimeWarning, stacklevel=2)
        f = f * weight
    return float(np.sum(f).real) * spec.cell_volume


def dump_fields(path, spec: TorusSpec, fields: dict) -> None:
    """Write scalar grid fields as text: header with grid shape, one row per node (row-major)."""
    names, cols = [], []
    for name, arr in fields.items():
        arr = np.asarray(arr, dtype=float)
        if arr.shape[: spec.n] != spec.grid:
            raise ValueError(f"field {name!r} is not on the grid")
        flat = arr.reshape(spec.nodes, -1)
        if flat.shape[1] == 1:
            names.append(name)
        else:
            tail = arr.shape[spec.n:]
            names.extend(f"{name}_" + "".join(map(str, ix)) for ix in np.ndindex(*tail))
        cols.append(flat)
    data = np.concatenate(cols, axis=1)
    with open(Path(path), "w") as fh:
        fh.write("# grid = " + " ".join(map(str, spec.grid)) + "\n")
        fh.write("# fields = " + " ".join(names) + "\n")
        for row in data:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_fields(path) -> tuple[tuple[int, ...], dict]:
    grid, names, rows = None, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# grid ="):
            grid = tuple(int(v) for v in line.split("=", 1)[1].split())
        elif line.startswith("# fields ="):
            names = line.split("=", 1)[1].split()
        elif line.strip():
            rows.append([float(v) for v in line.split()])
    data = np.array(rows)
    return grid, {nm: data[:, i].reshape(grid) for i, nm in enumerate(names)}
