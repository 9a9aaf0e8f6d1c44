"""Split-step spectral solver for the semilinear Dirac system on a periodic box.

The evolution  i du/dt = (alpha . (-i grad) + beta) u + F(x, u)  is advanced by
Strang splitting: a half-step of the pointwise flow du/dt = -i F(x, u) (RK4),
a full free step applied mode-by-mode with the closed-form propagator
exp(-i dt (alpha.xi + beta)), and another half-step of the pointwise flow.
The Fourier convention is the forward transform with exp(-i x.xi), so the
free factor multiplies each mode directly.

The linearized equation with potential dF(u(t)) and source f is advanced by
the *tangent* of the same scheme: within each local substep the background
RK4 stages are recomputed from the stored trajectory frame and the tangent
vector is propagated through them, with the source injected at the stage
times (linearly interpolated between frames).  With f = 0 this makes the
linearized solve the exact derivative of the discrete nonlinear solve, which
keeps divided-difference comparisons free of an extra discretization floor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .algebra import ALPHA_STACK, BETA, BETA_DIAG, free_propagator
from .errors import DivergenceError, GeometryError, GridMismatchError
from .nonlinearity import Nonlinearity

SPATIAL_AXES = (-4, -3, -2)  # fields have shape (..., n, n, n, 4)


# ---------------------------------------------------------------------------
# Grid and trajectories
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Grid:
    """Periodic cube [0, L)^3 sampled with n points per axis (n a power of 2)."""

    n: int
    length: float

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"grid size n={self.n} must be a power of two >= 8")
        if self.length <= 0:
            raise ValueError("box length must be positive")

    @property
    def cell(self) -> float:
        return self.length / self.n

    @cached_property
    def axis(self) -> np.ndarray:
        return self.cell * np.arange(self.n)

    @cached_property
    def freqs(self) -> np.ndarray:
        """Angular frequencies per axis in standard FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.cell)

    @cached_property
    def points(self) -> np.ndarray:
        """(n, n, n, 3) array of spatial coordinates."""
        x, y, z = np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")
        return np.stack([x, y, z], axis=-1)

    @cached_property
    def xi(self) -> np.ndarray:
        """(n, n, n, 3) array of mode frequencies."""
        fx, fy, fz = np.meshgrid(self.freqs, self.freqs, self.freqs, indexing="ij")
        return np.stack([fx, fy, fz], axis=-1)

    def l2_norm(self, fld) -> float:
        return float(self.cell**1.5 * np.linalg.norm(np.asarray(fld).ravel()))

    def h1_proxy(self, fld) -> float:
        """sqrt(L2^2 + sum of centered-difference gradient L2^2)."""
        fld = np.asarray(fld)
        total = self.l2_norm(fld) ** 2
        for ax in range(3):
            diff = (np.roll(fld, -1, axis=ax) - np.roll(fld, 1, axis=ax)) / (2 * self.cell)
            total += self.l2_norm(diff) ** 2
        return float(np.sqrt(total))

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n, self.n, self.n, 4), dtype=complex)


@dataclass
class Trajectory:
    """Time-indexed spinor fields: times[0] = 0, uniform stored step."""

    grid: Grid
    times: np.ndarray
    fields: np.ndarray  # (nt, n, n, n, 4)
    model_name: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) < 2:
            raise ValueError("a trajectory needs at least two time samples")
        if abs(self.times[0]) > 1e-14:
            raise ValueError("trajectory must start at t = 0")
        steps = np.diff(self.times)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("trajectory time samples must be uniform")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.fields[-1]

    def at_time(self, t: float) -> np.ndarray:
        """Linear interpolation between stored frames."""
        if t < -1e-12 or t > self.duration + 1e-12:
            raise GridMismatchError(f"time {t} outside trajectory range [0, {self.duration}]")
        pos = np.clip(t, 0.0, self.duration) / self.dt
        lo = min(int(np.floor(pos)), len(self.times) - 2)
        theta = pos - lo
        return (1.0 - theta) * self.fields[lo] + theta * self.fields[lo + 1]

    def l2_norms(self) -> np.ndarray:
        return np.array([self.grid.l2_norm(f) for f in self.fields])


# ---------------------------------------------------------------------------
# Field constructors used across tests and experiments
# ---------------------------------------------------------------------------


def plane_wave(grid: Grid, mode, spinor) -> np.ndarray:
    """exp(i x . xi_k) v for integer mode k (xi_k = 2 pi k / L)."""
    mode = np.asarray(mode, dtype=int)
    xi = 2.0 * np.pi * mode / grid.length
    phase = np.exp(1j * np.einsum("...k,k->...", grid.points, xi))
    return phase[..., None] * np.asarray(spinor, dtype=complex)


def eigen_plane_wave(grid: Grid, mode, branch: int = 0):
    """Plane wave whose spinor is an eigenvector of alpha.xi + beta.

    Returns (field, xi, eigenvalue, spinor); the free solution is then
    exp(i(x.xi - lambda t)) v exactly.
    """
    mode = np.asarray(mode, dtype=int)
    xi = 2.0 * np.pi * mode / grid.length
    h = np.einsum("k,kij->ij", xi.astype(float), ALPHA_STACK) + BETA
    evals, evecs = np.linalg.eigh(h)
    v = evecs[:, branch]
    return plane_wave(grid, mode, v), xi, float(evals[branch]), v


def gaussian_bump(grid: Grid, center, sigma: float, spinor, mode=None) -> np.ndarray:
    """Gaussian envelope (min-image metric) times an optional plane-wave carrier."""
    center = np.asarray(center, dtype=float)
    disp = grid.points - center
    disp = (disp + grid.length / 2.0) % grid.length - grid.length / 2.0
    env = np.exp(-np.sum(disp**2, axis=-1) / (2.0 * sigma**2))
    fld = env[..., None] * np.asarray(spinor, dtype=complex)
    if mode is not None:
        fld = fld * np.exp(
            1j * np.einsum("...k,k->...", grid.points, 2.0 * np.pi * np.asarray(mode) / grid.length)
        )[..., None]
    return fld


# ---------------------------------------------------------------------------
# Split-step machinery
# ---------------------------------------------------------------------------

_PROPAGATOR_CACHE: dict = {}


def _mode_propagator(grid: Grid, dt: float) -> np.ndarray:
    key = (grid.n, grid.length, dt)
    if key not in _PROPAGATOR_CACHE:
        if len(_PROPAGATOR_CACHE) > 8:
            _PROPAGATOR_CACHE.clear()
        _PROPAGATOR_CACHE[key] = free_propagator(grid.xi, dt)
    return _PROPAGATOR_CACHE[key]


def _free_apply(fields: np.ndarray, prop: np.ndarray) -> np.ndarray:
    """Apply the per-mode propagator to (..., n, n, n, 4) fields."""
    spec = np.fft.fftn(fields, axes=SPATIAL_AXES)
    spec = np.einsum("abcij,...abcj->...abci", prop, spec)
    return np.fft.ifftn(spec, axes=SPATIAL_AXES)


def _nl_substep(model: Nonlinearity, x, u, h):
    """RK4 step of du/dt = -i F(x, u); returns (new u, stage values)."""
    k1 = -1j * model.value(x, u)
    y2 = u + 0.5 * h * k1
    k2 = -1j * model.value(x, y2)
    y3 = u + 0.5 * h * k2
    k3 = -1j * model.value(x, y3)
    y4 = u + h * k3
    k4 = -1j * model.value(x, y4)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), (u, y2, y3, y4)


def _tangent_substep(model: Nonlinearity, x, stages, w, h, f_start=None, f_mid=None, f_end=None):
    """RK4 step of dw/dt = -i(dF(u(t)) w + f(t)) through the background stages.

    ``stages`` are the RK4 stage values of the nonlinear substep; propagating
    the tangent through them is RK4 on the coupled (background, tangent)
    system.  Sources may be None (treated as zero).
    """
    y1, y2, y3, y4 = stages

    def rhs(y, vec, f):
        out = model.d1(x, y, vec)
        return -1j * (out + f) if f is not None else -1j * out

    l1 = rhs(y1, w, f_start)
    l2 = rhs(y2, w + 0.5 * h * l1, f_mid)
    l3 = rhs(y3, w + 0.5 * h * l2, f_mid)
    l4 = rhs(y4, w + h * l3, f_end)
    return w + (h / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)


def _resolve_steps(T: float, dt: float) -> int:
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"dt={dt} does not divide T={T}")
    return n_steps


def check_support_preflight(grid: Grid, phi, T: float, threshold: float = 1e-6):
    """Require data in the middle half of the box and the light cone inside it.

    Propagation speed is 1, so the cone grown from the middle half stays
    clear of the periodic seam as long as T <= L/4.
    """
    phi = np.asarray(phi)
    amp = np.linalg.norm(phi, axis=-1)
    peak = amp.max()
    if peak == 0.0:
        return
    mask = amp > threshold * peak
    lo, hi = grid.length / 4.0, 3.0 * grid.length / 4.0
    for ax in range(3):
        coords = grid.points[..., ax][mask]
        if coords.min() < lo - 1e-9 or coords.max() > hi + 1e-9:
            raise GeometryError(
                f"initial data leaks outside the middle half of the box on axis {ax}"
            )
    if T > grid.length / 4.0 + 1e-12:
        raise GeometryError(
            f"T={T} too large: light cone leaves the box (need T <= L/4 = {grid.length / 4.0})"
        )


def _probe_substep_error(model, x, phi, dt) -> float:
    """Richardson estimate of the per-step RK4 error of the local substep."""
    one, _ = _nl_substep(model, x, phi, dt / 2.0)
    half, _ = _nl_substep(model, x, phi, dt / 4.0)
    two, _ = _nl_substep(model, x, half, dt / 4.0)
    return float(np.linalg.norm((one - two).ravel()) / 15.0)


def solve_nonlinear(
    model: Nonlinearity,
    phi: np.ndarray,
    grid: Grid,
    T: float,
    dt: float,
    *,
    store_every: int = 1,
    check_support: bool = True,
    blowup_factor: float = 100.0,
    substep_tol: float = 1e-8,
) -> Trajectory:
    """Strang-split solve of the semilinear system from t = 0 to t = T."""
    n_steps = _resolve_steps(T, dt)
    if store_every < 1 or n_steps % store_every:
        raise ValueError("store_every must divide the number of steps")
    phi = np.asarray(phi, dtype=complex)
    if check_support:
        check_support_preflight(grid, phi, T)
    x = grid.points
    probe = _probe_substep_error(model, x, phi, dt)
    init_norm = grid.l2_norm(phi)
    if probe > substep_tol * (1.0 + init_norm):
        raise ValueError(
            f"dt={dt} violates the local substep accuracy budget "
            f"(probe error {probe:.2e})"
        )
    prop = _mode_propagator(grid, dt)
    guard = blowup_factor * (1.0 + init_norm)

    u = phi.copy()
    times = [0.0]
    frames = [u.copy()]
    for m in range(n_steps):
        u, _ = _nl_substep(model, x, u, dt / 2.0)
        u = _free_apply(u, prop)
        u, _ = _nl_substep(model, x, u, dt / 2.0)
        if not np.all(np.isfinite(u.real)) or grid.l2_norm(u) > guard:
            raise DivergenceError(f"solution norm exceeded blow-up guard at step {m + 1}")
        if (m + 1) % store_every == 0:
            times.append((m + 1) * dt)
            frames.append(u.copy())
    return Trajectory(grid, np.asarray(times), np.asarray(frames), model.name)


def solve_linearized(
    model: Nonlinearity,
    background: Trajectory,
    phi_init: np.ndarray | None,
    source: Trajectory | None = None,
) -> Trajectory:
    """Tangent solve around a stored background, with optional source.

    With phi_init = 0 this is the causal inverse Q applied to the source.
    The background must be stored at every solver step; the source (if any)
    must share its time samples.
    """
    grid = background.grid
    dt = background.dt
    if source is not None:
        if source.grid is not grid and (source.grid.n != grid.n or source.grid.length != grid.length):
            raise GridMismatchError("source and background grids differ")
        if len(source.times) != len(background.times) or not np.allclose(
            source.times, background.times
        ):
            raise GridMismatchError("source and background time samples differ")
    w = grid.zeros() if phi_init is None else np.asarray(phi_init, dtype=complex).copy()
    x = grid.points
    prop = _mode_propagator(grid, dt)
    times = background.times
    frames = [w.copy()]
    for m in range(len(times) - 1):
        u_m = background.fields[m]
        if source is not None:
            f_m, f_m1 = source.fields[m], source.fields[m + 1]
            f_at = lambda th: (1.0 - th) * f_m + th * f_m1  # noqa: E731
        else:
            f_at = lambda th: None  # noqa: E731
        u_half, bot = _nl_substep(model, x, u_m, dt / 2.0)
        v_top = _free_apply(u_half, prop)
        _, top = _nl_substep(model, x, v_top, dt / 2.0)
        w = _tangent_substep(model, x, bot, w, dt / 2.0, f_at(0.0), f_at(0.25), f_at(0.5))
        w = _free_apply(w, prop)
        w = _tangent_substep(model, x, top, w, dt / 2.0, f_at(0.5), f_at(0.75), f_at(1.0))
        frames.append(w.copy())
    return Trajectory(grid, times.copy(), np.asarray(frames), model.name)


def apply_linearized_operator(model: Nonlinearity, background: Trajectory, traj: Trajectory):
    """Discrete residual  i dw/dt + i alpha.grad w - beta w - dF(u) w.

    Time derivative by centered differences over stored frames, spatial
    derivative spectrally.  Returns (interior times, residual fields); used
    to verify that Q(f) solves the sourced equation to O(dt^2).
    """
    grid = traj.grid
    dt = traj.dt
    x = grid.points
    minus_alpha_xi = -np.einsum("abck,kij->abcij", grid.xi, ALPHA_STACK)
    out_times = traj.times[1:-1]
    residuals = np.empty_like(traj.fields[1:-1])
    for idx, m in enumerate(range(1, len(traj.times) - 1)):
        w = traj.fields[m]
        dw_dt = (traj.fields[m + 1] - traj.fields[m - 1]) / (2.0 * dt)
        spec = np.fft.fftn(w, axes=(0, 1, 2))
        grad_term = np.fft.ifftn(
            np.einsum("abcij,abcj->abci", minus_alpha_xi, spec), axes=(0, 1, 2)
        )
        pot = model.d1(x, background.fields[m], w)
        residuals[idx] = 1j * dw_dt + grad_term - BETA_DIAG * w - pot
    return out_times, residuals


# ---------------------------------------------------------------------------
# Trigonometric interpolation and ray sampling
# ---------------------------------------------------------------------------


def _padded_spectrum(grid: Grid, fld: np.ndarray):
    """Normalized spectrum with the Nyquist mode split symmetrically.

    Returns (freqs of length n+1, spectrum of shape (n+1, n+1, n+1, 4)) so
    that u(x) = sum_k spec[k] exp(i x . xi_k) interpolates smoothly.
    """
    n = grid.n
    spec = np.fft.fftn(np.asarray(fld, dtype=complex), axes=(0, 1, 2)) / n**3
    half = n // 2
    freqs = np.concatenate([grid.freqs, [-grid.freqs[half]]])
    for ax in range(3):
        nyq = np.take(spec, half, axis=ax) * 0.5
        idx = [slice(None)] * spec.ndim
        idx[ax] = half
        spec[tuple(idx)] = nyq
        spec = np.concatenate([spec, nyq[None] if ax == 0 else np.expand_dims(nyq, ax)], axis=ax)
    return freqs, spec


def eval_field_at(grid: Grid, fld: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate a grid field at arbitrary spatial points by Fourier series."""
    freqs, spec = _padded_spectrum(grid, fld)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    e0 = np.exp(1j * np.outer(pts[:, 0], freqs))
    e1 = np.exp(1j * np.outer(pts[:, 1], freqs))
    e2 = np.exp(1j * np.outer(pts[:, 2], freqs))
    out = np.einsum("ma,mb,mc,abcs->ms", e0, e1, e2, spec, optimize=True)
    return out if np.asarray(points).ndim > 1 else out[0]


def sample_along_ray(traj: Trajectory, ray, s_grid) -> np.ndarray:
    """Field values u(Gamma(s)) along a bicharacteristic's spacetime track.

    Fourier interpolation in space, linear interpolation in time.  Raises
    GeometryError when the spatial track comes within two grid cells of the
    periodic seam, where the torus stops being a faithful patch of R^3.
    """
    grid = traj.grid
    s_grid = np.asarray(s_grid, dtype=float)
    t_pts = ray.y0[0] + 2.0 * s_grid * ray.eta.tau
    x_pts = ray.y0[1:][None, :] - 2.0 * s_grid[:, None] * ray.eta.xi[None, :]
    wrapped = np.mod(x_pts, grid.length)
    margin = 2.0 * grid.cell
    if np.any(wrapped < margin) or np.any(wrapped > grid.length - margin):
        raise GeometryError("ray track leaves the safe interpolation region")
    if t_pts.min() < -1e-12 or t_pts.max() > traj.duration + 1e-12:
        raise GridMismatchError("ray time span not covered by the trajectory")

    pos = np.clip(t_pts, 0.0, traj.duration) / traj.dt
    lo = np.minimum(np.floor(pos).astype(int), len(traj.times) - 2)
    theta = pos - lo
    out = np.empty((len(s_grid), 4), dtype=complex)
    for frame in np.unique(lo):
        sel = lo == frame
        vals_lo = eval_field_at(grid, traj.fields[frame], wrapped[sel])
        vals_hi = eval_field_at(grid, traj.fields[frame + 1], wrapped[sel])
        out[sel] = (1.0 - theta[sel, None]) * vals_lo + theta[sel, None] * vals_hi
    return out


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_trajectory(traj: Trajectory, basepath: str) -> tuple[str, str]:
    """Write <base>.json header and <base>.bin little-endian interleaved data."""
    header = {
        "format": "diraclab-trajectory-v1",
        "grid": {"n": traj.grid.n, "length": traj.grid.length},
        "times": traj.times.tolist(),
        "model": traj.model_name,
        "dtype": "<f8 interleaved re,im",
        "shape": list(traj.fields.shape),
    }
    json_path, bin_path = f"{basepath}.json", f"{basepath}.bin"
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2)
    interleaved = np.empty(traj.fields.shape + (2,), dtype="<f8")
    interleaved[..., 0] = traj.fields.real
    interleaved[..., 1] = traj.fields.imag
    interleaved.tofile(bin_path)
    return json_path, bin_path


def load_trajectory(basepath: str) -> Trajectory:
    with open(f"{basepath}.json", encoding="utf-8") as f:
        header = json.load(f)
    if header.get("format") != "diraclab-trajectory-v1":
        raise ValueError("unrecognized trajectory file format")
    shape = tuple(header["shape"])
    raw = np.fromfile(f"{basepath}.bin", dtype="<f8").reshape(shape + (2,))
    grid = Grid(header["grid"]["n"], header["grid"]["length"])
    return Trajectory(
        grid,
        np.asarray(header["times"]),
        raw[..., 0] + 1j * raw[..., 1],
        header.get("model", ""),
    )


def diagnostics_rows(traj: Trajectory):
    """(time, L2 norm, free-energy proxy) per stored frame, for CSV export."""
    grid = traj.grid
    h_op = np.einsum("abck,kij->abcij", grid.xi, ALPHA_STACK) + BETA
    rows = []
    for t, fld in zip(traj.times, traj.fields):
        spec = np.fft.fftn(fld, axes=(0, 1, 2))
        energy = np.einsum("abci,abcij,abcj->", np.conj(spec), h_op, spec).real
        energy *= (grid.cell / grid.n) ** 3 / grid.n**0  # (L/n)^3 / n^3
        energy = float(energy * grid.cell**3 / grid.n**3)
        rows.append((float(t), grid.l2_norm(fld), energy))
    return rows
