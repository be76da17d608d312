"""Wiener paths, seeding and the Stratonovich Heun step shared by every simulator.

White noise on a step of length ``dt`` is carried as the Wiener increment
``dW ~ N(0, dt)``; the driver value ``phi = dW / dt`` is held constant over
the step.  Streams come from a counter-based Philox generator keyed by
``(master_seed, member, stream)`` so ensemble members can be generated in any
order, on any worker, and still reproduce bit for bit.
"""
from dataclasses import dataclass, field

import numpy as np

BLOWUP_THRESHOLD = 1e9


class InvalidParameterError(ValueError):
    """A parameter is outside its documented domain."""


class NumericalBlowupError(FloatingPointError):
    """A trajectory became non-finite or exceeded ``BLOWUP_THRESHOLD``."""

    def __init__(self, time, message=None):
        self.time = float(time)
        super().__init__(message or f"numerical blow-up at t={self.time:.6g}")


def member_rng(master_seed, member=0, stream=0):
    """Generator for ensemble member ``member`` on sub-stream ``stream``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(member), int(stream)))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class WienerIncrements:
    seed: int
    dt: float
    increments: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.increments)

    @property
    def white_noise(self):
        """Piecewise-constant driver values ``dW / dt``."""
        return self.increments / self.dt

    def path(self):
        """Wiener path ``W(t_k)`` including ``W(0) = 0``."""
        return np.concatenate(([0.0], np.cumsum(self.increments)))


def _check_dt(dt):
    if not dt > 0 or not np.isfinite(dt):
        raise InvalidParameterError(f"dt must be positive and finite, got {dt!r}")


def generate_increments(seed, dt, n, stream=0):
    """Draw ``n`` Wiener increments of variance ``dt``, reproducibly from ``seed``."""
    _check_dt(dt)
    if n < 0:
        raise InvalidParameterError(f"n must be non-negative, got {n}")
    rng = member_rng(seed, 0, stream)
    inc = rng.normal(0.0, np.sqrt(dt), size=int(n))
    inc.setflags(write=False)
    return WienerIncrements(int(seed), float(dt), inc)


def ensemble_increments(master_seed, members, n_steps, dt, n_noises=1, stream=0):
    """Increments for several ensemble members, shape ``(len(members), n_steps, n_noises)``.

    Member ``k`` always receives the same numbers regardless of which other
    members are generated alongside it.
    """
    _check_dt(dt)
    members = list(members)
    out = np.empty((len(members), int(n_steps), int(n_noises)))
    sd = np.sqrt(dt)
    for i, k in enumerate(members):
        out[i] = member_rng(master_seed, k, stream).normal(0.0, sd, size=(int(n_steps), int(n_noises)))
    return out


@dataclass(frozen=True)
class SdeState:
    components: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        comp = np.array(self.components, dtype=float).reshape(-1)
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)


def check_state(x, time):
    x = np.asarray(x)
    if not np.all(np.isfinite(x)) or np.any(np.abs(x) > BLOWUP_THRESHOLD):
        raise NumericalBlowupError(time)


def _noise_term(g, dW):
    if np.ndim(dW) == 0:
        return np.asarray(g, dtype=float) * dW
    return np.asarray(g, dtype=float) @ np.asarray(dW, dtype=float)


def heun_step(state, drift, diffusion, dW, dt):
    """One Stratonovich Heun predictor-corrector step.

    Parameters
    ----------
    state : SdeState
    drift : callable
        ``drift(x) -> (d,)``.
    diffusion : callable
        ``diffusion(x) -> (d,)`` for a scalar ``dW``, or ``(d, m)`` when
        ``dW`` holds ``m`` independent increments.
    dW : float or array_like
    dt : float

    Returns
    -------
    SdeState
        ``x + (f(x) + f(xp)) dt / 2 + (g(x) + g(xp)) dW / 2`` with the Euler
        predictor ``xp = x + f(x) dt + g(x) dW``.

    Raises
    ------
    NumericalBlowupError
        If the new state is non-finite or larger than ``BLOWUP_THRESHOLD``.
    """
    _check_dt(dt)
    x = state.components
    f0 = np.asarray(drift(x), dtype=float)
    g0 = diffusion(x)
    xp = x + f0 * dt + _noise_term(g0, dW)
    f1 = np.asarray(drift(xp), dtype=float)
    g1 = diffusion(xp)
    new = x + 0.5 * (f0 + f1) * dt + 0.5 * (_noise_term(g0, dW) + _noise_term(g1, dW))
    t = state.time + dt
    check_state(new, t)
    return SdeState(new, t)
