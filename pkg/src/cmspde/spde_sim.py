"""Finite-difference simulation of the noisy Burgers-type SPDE

    u_t = -u u_x + u_xx + (1 - gamma) u + sigma * sum_k phi_k(t) sin(k x)

on ``0 < x < pi`` with ``u = 0`` at both ends.  Second-order centred
differences in space, conservative centred advection ``-(u^2/2)_x``, and a
Heun step in time with the additive forcing entering as ``dW_k / dt`` held
over the step.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .stochastic_core import (InvalidParameterError, NumericalBlowupError,
                              check_state, ensemble_increments)


@dataclass(frozen=True)
class Grid:
    n_interior: int

    def __post_init__(self):
        if self.n_interior < 1:
            raise InvalidParameterError("grid needs at least one interior node")

    @classmethod
    def from_dx(cls, dx):
        """Grid whose spacing is ``dx``; ``pi / dx`` must be (nearly) an integer."""
        cells = np.pi / dx
        n = int(round(cells))
        if n < 2 or abs(cells - n) > 1e-6 * n:
            raise InvalidParameterError(f"dx={dx!r} does not divide pi into whole cells")
        return cls(n - 1)

    @property
    def dx(self):
        return np.pi / (self.n_interior + 1)

    @property
    def x(self):
        return self.dx * np.arange(1, self.n_interior + 1)

    def sample(self, func):
        return np.asarray(func(self.x), dtype=float)


@dataclass(frozen=True)
class FieldState:
    u: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


@dataclass(frozen=True)
class SpdeParams:
    gamma: float = 0.0
    sigma: float = 0.0
    noise_modes: tuple = (2,)
    dt: float = 0.05
    advection: bool = True

    def __post_init__(self):
        object.__setattr__(self, "noise_modes", tuple(int(k) for k in self.noise_modes))
        if self.sigma < 0:
            raise InvalidParameterError("sigma must be non-negative")
        if self.sigma > 0 and not self.noise_modes:
            raise InvalidParameterError("noise_modes must be non-empty when sigma > 0")
        if any(k < 1 for k in self.noise_modes):
            raise InvalidParameterError("noise wavenumbers must be positive")
        if not self.dt > 0:
            raise InvalidParameterError("dt must be positive")


def forcing_profiles(params, grid):
    """``sin(k x_i)`` for each forced wavenumber, shape ``(n_modes, n_interior)``."""
    if not params.noise_modes:
        return np.zeros((0, grid.n_interior))
    return np.array([np.sin(k * grid.x) for k in params.noise_modes])


def spde_rhs(field, params, grid, noise_values=None):
    """Right-hand side of the SPDE at the grid nodes, noise driver values included."""
    u = field.u if isinstance(field, FieldState) else np.asarray(field, dtype=float)
    rhs = kernels.spde_rhs_numpy(u, grid.dx, params.gamma, 1.0 if params.advection else 0.0)
    if noise_values is not None and params.sigma:
        phi = np.asarray(noise_values, dtype=float).reshape(-1)
        if phi.size != len(params.noise_modes):
            raise InvalidParameterError("need one noise value per forced mode")
        rhs = rhs + params.sigma * phi @ forcing_profiles(params, grid)
    return rhs


def spde_step(field, params, grid, increments):
    """One Heun step; ``increments`` holds one ``dW_k`` per forced mode."""
    dt = params.dt
    dW = np.asarray(increments, dtype=float).reshape(-1)
    if dW.size != len(params.noise_modes):
        raise InvalidParameterError("need one increment per forced mode")
    eta = params.sigma * dW @ forcing_profiles(params, grid) if dW.size else 0.0
    adv = 1.0 if params.advection else 0.0
    f0 = kernels.spde_rhs_numpy(field.u, grid.dx, params.gamma, adv)
    up = field.u + f0 * dt + eta
    u = field.u + 0.5 * (f0 + kernels.spde_rhs_numpy(up, grid.dx, params.gamma, adv)) * dt + eta
    t = field.time + dt
    check_state(u, t)
    return FieldState(u, t)


def project_amplitude(field, grid):
    """Coefficient of ``sin x``: ``(2/pi) sum_i u_i sin(x_i) dx``.

    Accepts a ``FieldState`` or an array whose last axis runs over nodes.
    """
    u = field.u if isinstance(field, FieldState) else np.asarray(field, dtype=float)
    return (2.0 / np.pi) * grid.dx * (u @ np.sin(grid.x))


def mode_field(grid, amplitudes):
    """``sum_k amplitudes[k] sin(k x)`` on the grid, from a ``{k: amp}`` mapping."""
    u = np.zeros(grid.n_interior)
    for k, amp in amplitudes.items():
        u += amp * np.sin(k * grid.x)
    return FieldState(u)


@dataclass
class SpdeRun:
    t: np.ndarray
    a: np.ndarray
    fields: np.ndarray = field(default=None, repr=False)
    blow_time: float = None

    @property
    def blew_up(self):
        return self.blow_time is not None


@dataclass
class SpdeEnsemble:
    t: np.ndarray
    a: np.ndarray  # (members, records)
    blow_times: np.ndarray  # NaN where the member finished
    fields: np.ndarray = field(default=None, repr=False)

    @property
    def n_blowups(self):
        return int(np.sum(np.isfinite(self.blow_times)))


def _steps(T, dt):
    if not T > 0:
        raise InvalidParameterError("horizon must be positive")
    n = int(round(T / dt))
    if n < 1:
        raise InvalidParameterError("horizon shorter than one step")
    return n


def simulate_spde(params, grid, initial, dW, record_every=1, backend=None):
    """Integrate each member's field with the given increments ``(M, steps, n_modes)``.

    Returns ``(t, fields, blow_times)`` where ``fields`` has shape
    ``(M, records + 1, n_interior)`` and includes the initial field.
    """
    dW = np.ascontiguousarray(dW, dtype=float)
    M, steps = dW.shape[:2]
    u0 = np.broadcast_to(np.asarray(initial.u if isinstance(initial, FieldState) else initial,
                                    dtype=float), (M, grid.n_interior)).copy()
    rec, blow = kernels.run("spde", u0, dW, params.dt, grid.dx, float(params.gamma),
                            float(params.sigma), forcing_profiles(params, grid),
                            1.0 if params.advection else 0.0, int(record_every), backend=backend)
    fields = np.concatenate([u0[:, None, :], rec], axis=1)
    t0 = initial.time if isinstance(initial, FieldState) else 0.0
    t = t0 + params.dt * record_every * np.arange(fields.shape[1])
    blow_times = np.where(blow >= 0, t0 + (blow + 1) * params.dt, np.nan)
    return t, fields, blow_times


def run_spde_ensemble(params, grid, initial, master_seed, n_members, T, record_every=1,
                      keep_fields=False, members=None, backend=None):
    """Run ``n_members`` independent SPDE trajectories from the same initial field."""
    steps = _steps(T, params.dt)
    members = range(n_members) if members is None else members
    dW = ensemble_increments(master_seed, members, steps, params.dt, max(len(params.noise_modes), 1))
    if not params.noise_modes:
        dW = dW[:, :, :0]
    t, fields, blow_times = simulate_spde(params, grid, initial, dW, record_every, backend)
    return SpdeEnsemble(t, project_amplitude(fields, grid), blow_times,
                        fields if keep_fields else None)


def run_spde(params, grid, initial, seed, T, record_every=1, keep_fields=False, member=0,
             raise_on_blowup=True, backend=None):
    """Single SPDE trajectory; deterministic given ``(seed, member)``.

    Raises
    ------
    NumericalBlowupError
        When the trajectory blows up and ``raise_on_blowup`` is set; the error
        carries the time of the offending step.
    """
    ens = run_spde_ensemble(params, grid, initial, seed, 1, T, record_every, keep_fields,
                            members=[member], backend=backend)
    blow = ens.blow_times[0]
    if np.isfinite(blow) and raise_on_blowup:
        raise NumericalBlowupError(blow)
    fields = ens.fields[0] if keep_fields else None
    return SpdeRun(ens.t, ens.a[0], fields, float(blow) if np.isfinite(blow) else None)
