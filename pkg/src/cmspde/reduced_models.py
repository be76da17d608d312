"""Amplitude models for the neutral ``sin x`` mode.

Three models of increasing usefulness:

* naive strong model -- the amplitude equation straight off the centre
  manifold, full of fast-time convolutions of the noise;
* normal-form strong model -- convolutions stripped out of the linear noise
  term, only ``E2 phi`` and ``E3 E2 phi`` survive inside a quadratic noise;
* weak long-time model -- the quadratic noise replaced by its long-time
  statistics: a stabilising drift ``-sigma^2 a / 88`` and a new independent
  multiplicative noise ``psi``.

The strong models carry a bank of filter states alongside ``a`` (see
``kernels.BANK_RATES``):

    z_A = E2 phi,      z_B = E2 E2 phi,   z_C = E3 E2 phi,  z_D = E2 E3 E2 phi,
    z_E = E4 E2 phi,   z_F = E4 E3 E2 phi, z_G = E3 E2 E2 phi

with ``E_m`` convolution with ``exp[-(m^2 - 1) t]``.  Everything is
interpreted in the Stratonovich sense.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .spde_sim import FieldState
from .stochastic_core import (InvalidParameterError, NumericalBlowupError, SdeState,
                              ensemble_increments, heun_step)

BANK_NAMES = ("z_A", "z_B", "z_C", "z_D", "z_E", "z_F", "z_G")

# Coefficient of the combined new noise psi in the weak model.
PSI_COMBINED = np.sqrt(515.0) / (1936.0 * np.sqrt(3.0))
# Component form: psi1 and psi2 coefficients (overall factor sigma^2 a).
PSI1_COMPONENT = -2.0 / (121.0 * np.sqrt(6.0))
PSI2_COMPONENT = 1.0 / 1936.0
# psi2 coefficient obtained by substituting the replacement rules directly.
PSI2_SUBSTITUTED = 3.0 / 1936.0


@dataclass(frozen=True)
class ModelParams:
    gamma: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidParameterError("sigma must be non-negative")


@dataclass(frozen=True)
class StrongModelState:
    a: float
    z: np.ndarray = None
    time: float = 0.0

    def __post_init__(self):
        z = np.zeros(len(BANK_NAMES)) if self.z is None else np.array(self.z, dtype=float)
        if z.shape != (len(BANK_NAMES),):
            raise InvalidParameterError(f"filter bank must have {len(BANK_NAMES)} states")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "a", float(self.a))

    def __getattr__(self, name):
        if name in BANK_NAMES:
            return float(self.z[BANK_NAMES.index(name)])
        raise AttributeError(name)


@dataclass(frozen=True)
class WeakModelState:
    a: float
    time: float = 0.0


# ----------------------------------------------------------- right-hand sides

def _deterministic(a, gamma):
    return -gamma * a - a ** 3 / 12.0


def naive_rhs(state, params, phi2=0.0):
    """``da/dt`` of the naive model.  ``phi2`` only enters through the filters."""
    a, g, s = state.a, params.gamma, params.sigma
    zA, zB, zC, zD = state.z[:4]
    return (_deterministic(a, g)
            + s * a * 0.5 * (zA - g * zB)
            + s * a ** 3 * (zA / 64.0 + zB / 12.0 + zC / 8.0 - 0.75 * zD))


def normal_form_noise_coefficient(a, zA, zC, params):
    g, s = params.gamma, params.sigma
    return s * a * (1.0 / 6.0 - g / 18.0) - s * s * a * (zA - 3.0 * zC) / 44.0


def normal_form_rhs(state, params, phi2):
    """``da/dt`` of the normal-form model for driver value ``phi2``."""
    coef = normal_form_noise_coefficient(state.a, state.z[0], state.z[2], params)
    return _deterministic(state.a, params.gamma) + coef * phi2


def weak_linear_rate(params):
    """Linear growth rate of the weak model at ``a = 0``: ``-(gamma + sigma^2/88)``."""
    return -(params.gamma + params.sigma ** 2 / 88.0)


def weak_noise_coefficients(params, psi_form="combined", psi2=PSI2_COMPONENT):
    """Per-noise coefficients ``s_k`` so that the noise term is ``a * sum_k s_k dW_k``.

    The first entry multiplies ``phi2``; the rest multiply the new noises
    (one for ``"combined"``, two for ``"component"``).
    """
    s = params.sigma
    first = s * (1.0 / 6.0 - params.gamma / 18.0)
    if psi_form == "combined":
        return np.array([first, s * s * PSI_COMBINED])
    if psi_form == "component":
        return np.array([first, s * s * PSI1_COMPONENT, s * s * psi2])
    raise InvalidParameterError(f"psi_form must be 'combined' or 'component', got {psi_form!r}")


def weak_rhs(state, params, phi2, psi):
    """``da/dt`` of the weak model; ``psi`` is a scalar or the two component noises."""
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    form = "combined" if psi.size == 1 else "component"
    coefs = weak_noise_coefficients(params, form)
    drivers = np.concatenate(([phi2], psi))
    return (weak_linear_rate(params) * state.a - state.a ** 3 / 12.0
            + state.a * float(coefs @ drivers))


def deterministic_equilibrium(gamma):
    """Non-trivial equilibrium ``sqrt(-12 gamma)`` of ``-gamma a - a^3/12`` (0 if none)."""
    return float(np.sqrt(-12.0 * gamma)) if gamma < 0 else 0.0


# ------------------------------------------------------------------- steppers

def _bank_drift(z):
    src = np.where(kernels.BANK_SOURCE >= 0, z[np.maximum(kernels.BANK_SOURCE, 0)], 0.0)
    return -kernels.BANK_RATES * z + src


_BANK_KICK = np.eye(len(BANK_NAMES))[0]


def _strong_system(params, variant):
    def drift(x):
        a, z = x[0], x[1:]
        if variant == "naive":
            fa = naive_rhs(StrongModelState(a, z), params)
        else:
            fa = _deterministic(a, params.gamma)
        return np.concatenate(([fa], _bank_drift(z)))

    def diffusion(x):
        a, z = x[0], x[1:]
        ga = 0.0 if variant == "naive" else normal_form_noise_coefficient(a, z[0], z[2], params)
        return np.concatenate(([ga], _BANK_KICK))

    return drift, diffusion


def step_strong_model(state, params, variant, dW, dt):
    """One Heun step of ``(a, z_A..z_G)`` for ``variant`` in ``{"naive", "normal_form"}``.

    The filter bank is advanced exactly as a coupled chain of exponential
    filters driven by the same increment as ``a``.
    """
    if variant not in ("naive", "normal_form"):
        raise InvalidParameterError(f"unknown strong-model variant {variant!r}")
    drift, diffusion = _strong_system(params, variant)
    x = heun_step(SdeState(np.concatenate(([state.a], state.z)), state.time), drift, diffusion, dW, dt)
    return StrongModelState(x.components[0], x.components[1:], x.time)


def step_weak_model(state, params, dW_phi, dW_psi, dt):
    """One Heun step of the weak model; ``dW_psi`` is scalar (combined) or length 2."""
    dW_psi = np.atleast_1d(np.asarray(dW_psi, dtype=float))
    coefs = weak_noise_coefficients(params, "combined" if dW_psi.size == 1 else "component")
    lam = weak_linear_rate(params)
    x = heun_step(SdeState([state.a], state.time),
                  lambda v: lam * v - v ** 3 / 12.0,
                  lambda v: v[:, None] * coefs[None, :],
                  np.concatenate(([dW_phi], dW_psi)), dt)
    return WeakModelState(float(x.components[0]), x.time)


# ---------------------------------------------------------------- ensembles

@dataclass
class AmplitudeEnsemble:
    t: np.ndarray
    a: np.ndarray  # (members, records)
    blow_times: np.ndarray
    z: np.ndarray = None  # (members, records, 7) for strong models

    @property
    def n_blowups(self):
        return int(np.sum(np.isfinite(self.blow_times)))


def _n_steps(T, dt):
    if not T > 0 or not dt > 0:
        raise InvalidParameterError("horizon and dt must be positive")
    return int(round(T / dt))


def _blow_times(blow, dt):
    return np.where(blow >= 0, (blow + 1) * dt, np.nan)


def simulate_strong(params, variant, a0, dW, dt, record_every=1, z0=None, backend=None):
    """Strong-model ensemble driven by increments ``dW`` of shape ``(M, steps)``."""
    dW = np.ascontiguousarray(dW, dtype=float)
    M = dW.shape[0]
    a0 = np.broadcast_to(np.asarray(a0, dtype=float), (M,)).copy()
    z0 = np.zeros((M, len(BANK_NAMES))) if z0 is None else np.broadcast_to(z0, (M, len(BANK_NAMES))).copy()
    code = {"naive": kernels.NAIVE, "normal_form": kernels.NORMAL_FORM}[variant]
    rec, blow = kernels.run("strong", a0, z0, dW, float(dt), float(params.gamma),
                            float(params.sigma), code, int(record_every), backend=backend)
    a = np.concatenate([a0[:, None], rec[:, :, 0]], axis=1)
    z = np.concatenate([z0[:, None, :], rec[:, :, 1:]], axis=1)
    t = dt * record_every * np.arange(a.shape[1])
    return AmplitudeEnsemble(t, a, _blow_times(blow, dt), z)


def run_strong_ensemble(params, variant, a0, master_seed, n_members, T, dt, record_every=1,
                        backend=None):
    dW = ensemble_increments(master_seed, range(n_members), _n_steps(T, dt), dt)[:, :, 0]
    return simulate_strong(params, variant, a0, dW, dt, record_every, backend=backend)


def simulate_weak(params, a0, dW_phi, dW_psi, dt, record_every=1, psi_form="combined",
                  psi2=PSI2_COMPONENT, backend=None):
    """Weak-model ensemble.  ``dW_phi`` is ``(M, steps)``; ``dW_psi`` is ``(M, steps, 1 or 2)``."""
    dW = np.ascontiguousarray(np.concatenate([np.asarray(dW_phi)[:, :, None], dW_psi], axis=2))
    M = dW.shape[0]
    a0 = np.broadcast_to(np.asarray(a0, dtype=float), (M,)).copy()
    coefs = weak_noise_coefficients(params, psi_form, psi2)
    if coefs.size != dW.shape[2]:
        raise InvalidParameterError("psi increments do not match psi_form")
    rec, blow = kernels.run("weak", a0, dW, float(dt), weak_linear_rate(params), coefs,
                            int(record_every), backend=backend)
    a = np.concatenate([a0[:, None], rec], axis=1)
    t = dt * record_every * np.arange(a.shape[1])
    return AmplitudeEnsemble(t, a, _blow_times(blow, dt))


def run_weak_ensemble(params, a0, master_seed, n_members, T, dt, record_every=1,
                      psi_form="combined", psi2=PSI2_COMPONENT, members=None, backend=None):
    """Weak-model ensemble; ``phi2`` from sub-stream 0 and ``psi`` from sub-stream 1."""
    steps = _n_steps(T, dt)
    members = range(n_members) if members is None else members
    n_psi = 1 if psi_form == "combined" else 2
    dW_phi = ensemble_increments(master_seed, members, steps, dt, 1, stream=0)[:, :, 0]
    dW_psi = ensemble_increments(master_seed, members, steps, dt, n_psi, stream=1)
    return simulate_weak(params, a0, dW_phi, dW_psi, dt, record_every, psi_form, psi2, backend)


# ------------------------------------------------------- field reconstruction

def reconstruct_field(a, filters, params, grid):
    """Subgrid field implied by amplitude ``a`` and the naive-model filter states.

    ``u = a sin x - a^2/6 sin 2x + sigma (z_A - gamma z_B) sin 2x
    - 3/2 sigma a (z_C - gamma z_G) sin 3x + sigma a^2/3 (z_E + 9 z_F) sin 4x``.
    """
    z = filters.z if isinstance(filters, StrongModelState) else np.asarray(filters, dtype=float)
    zA, zB, zC, _, zE, zF, zG = z
    g, s = params.gamma, params.sigma
    x = grid.x
    u = (a * np.sin(x)
         + (-a * a / 6.0 + s * (zA - g * zB)) * np.sin(2 * x)
         - 1.5 * s * a * (zC - g * zG) * np.sin(3 * x)
         + s * a * a / 3.0 * (zE + 9.0 * zF) * np.sin(4 * x))
    time = filters.time if isinstance(filters, StrongModelState) else 0.0
    return FieldState(u, time)


def normal_form_sinx_amplitude(a, z, params):
    """``sin x`` coefficient of the field for normal-form amplitude ``a``, to first order in sigma.

    Stripping ``E2 phi`` out of the linear noise term moves
    ``sigma a ((gamma/18 - 1/6) z_A + gamma/6 z_B)`` from the amplitude into
    the subgrid field's ``sin x`` component.
    """
    z = np.asarray(z, dtype=float)
    g, s = params.gamma, params.sigma
    return a * (1.0 + s * ((g / 18.0 - 1.0 / 6.0) * z[..., 0] + g / 6.0 * z[..., 1]))


def check_trajectory(ens):
    """Raise if every member of an ensemble blew up."""
    if ens.n_blowups == len(ens.blow_times) and len(ens.blow_times):
        raise NumericalBlowupError(np.nanmin(ens.blow_times), "all trajectories blew up")
