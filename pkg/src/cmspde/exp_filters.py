"""Exponential-memory filters.

``E_m`` is convolution with ``exp[-(m^2 - 1) t]`` from a quiescent past,
realised as the state ``z`` of ``dz/dt = -(m^2 - 1) z + input``.  Repeated
convolutions such as ``E_3 E_2 phi`` become chains of such states, the
output of one stage driving the next.

Inputs are passed as the integral of the driver over the step (``drive``):
``dW`` for white noise, ``signal * dt`` for a signal held constant over the
step.
"""
from dataclasses import dataclass, replace

import numpy as np

from .stochastic_core import InvalidParameterError, check_state


@dataclass(frozen=True)
class ExpFilter:
    m: int
    z: float = 0.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise InvalidParameterError(f"filter mode index must be an integer >= 2, got {self.m!r}")

    @property
    def rate(self):
        return float(self.m * self.m - 1)


def filter_step(filt, drive, dt, time=0.0):
    """Advance one Heun step of ``dz = -rate z dt + drive``."""
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt!r}")
    k = filt.rate
    z = filt.z
    zp = z - k * z * dt + drive
    z_new = z - 0.5 * k * (z + zp) * dt + drive
    check_state(z_new, time + dt)
    return replace(filt, z=float(z_new))


@dataclass(frozen=True)
class FilterChain:
    """Composition ``E_{m_n} ... E_{m_1}`` applied to the input.

    ``signal`` remembers the last step's input value so an empty chain can
    act as the identity.
    """

    stages: tuple = ()
    signal: float = 0.0

    @classmethod
    def of(cls, *modes):
        return cls(tuple(ExpFilter(m) for m in modes))

    @property
    def output(self):
        return self.stages[-1].z if self.stages else self.signal

    def values(self):
        return np.array([s.z for s in self.stages])


def chain_step(chain, drive, dt, time=0.0):
    """Advance every stage of ``chain`` by one coupled Heun step.

    Stage ``i + 1`` is driven by the output of stage ``i``, taken at the start
    of the step and at the predictor point, so the chain advances as one
    linear system and coincides with ``filter_step`` for a single stage.
    """
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt!r}")
    if not chain.stages:
        return replace(chain, signal=drive / dt)
    rates = np.array([s.rate for s in chain.stages])
    z = chain.values()

    def f(v):
        src = np.concatenate(([0.0], v[:-1]))
        return -rates * v + src

    kick = np.zeros_like(z)
    kick[0] = drive
    zp = z + f(z) * dt + kick
    z_new = z + 0.5 * (f(z) + f(zp)) * dt + kick
    check_state(z_new, time + dt)
    stages = tuple(replace(s, z=float(v)) for s, v in zip(chain.stages, z_new))
    return FilterChain(stages, drive / dt)


def stationary_z_covariance(beta1, beta2):
    """Stationary covariance of ``(z1, z2)`` with ``dz1 = -beta1 z1 dt + dW`` and
    ``dz2 = (-beta2 z2 + z1) dt``.
    """
    if not (beta1 > 0 and beta2 > 0):
        raise InvalidParameterError("decay rates must be positive")
    s = beta1 + beta2
    c12 = 1.0 / (2 * beta1 * s)
    return np.array([
        [1.0 / (2 * beta1), c12],
        [c12, 1.0 / (2 * beta1 * beta2 * s)],
    ])
