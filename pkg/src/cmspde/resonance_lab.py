"""Long-time statistics of the quadratic-noise processes.

    dy1 = z1 o dW,  dy2 = z2 o dW,  dz1 = -beta1 z1 dt + dW,  dz2 = (-beta2 z2 + z1) dt

(Stratonovich products).  Over long times ``y`` drifts at ``(1/2, 0)`` and
diffuses with matrix ``D``; these are checked here by Monte Carlo against
the closed forms.
"""
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kernels
from .reduced_models import PSI2_COMPONENT, PSI2_SUBSTITUTED, PSI_COMBINED, PSI1_COMPONENT
from .stochastic_core import InvalidParameterError, SdeState, ensemble_increments, heun_step

BETA1 = 3.0
BETA2 = 8.0


def _check_betas(beta1, beta2):
    if not (beta1 > 0 and beta2 > 0):
        raise InvalidParameterError("decay rates must be positive")


@dataclass(frozen=True)
class QuadNoiseState:
    y1: float = 0.0
    y2: float = 0.0
    z1: float = 0.0
    z2: float = 0.0
    beta1: float = BETA1
    beta2: float = BETA2
    time: float = 0.0

    def __post_init__(self):
        _check_betas(self.beta1, self.beta2)

    def vector(self):
        return np.array([self.y1, self.y2, self.z1, self.z2])


def quad_step(state, dW, dt):
    """Heun step of the quadratic-noise system with one shared driver increment."""
    b1, b2 = state.beta1, state.beta2
    x = heun_step(SdeState(state.vector(), state.time),
                  lambda v: np.array([0.0, 0.0, -b1 * v[2], v[2] - b2 * v[3]]),
                  lambda v: np.array([v[2], v[3], 1.0, 0.0]),
                  dW, dt)
    y1, y2, z1, z2 = x.components
    return replace(state, y1=y1, y2=y2, z1=z1, z2=z2, time=x.time)


def theoretical_diffusion(beta1=BETA1, beta2=BETA2):
    """Diffusion matrix ``D`` of the slow ``(y1, y2)`` dynamics."""
    _check_betas(beta1, beta2)
    s = beta1 + beta2
    d12 = 1.0 / (4 * beta1 * s)
    return np.array([[1.0 / (4 * beta1), d12], [d12, 1.0 / (4 * beta1 * beta2 * s)]])


@dataclass(frozen=True)
class ReplacementCoefficients:
    """``y1' = y1_drift + y1_psi1 psi1`` and ``y2' = y2_psi1 psi1 + y2_psi2 psi2``."""

    y1_drift: float
    y1_psi1: float
    y2_psi1: float
    y2_psi2: float

    def noise_matrix(self):
        return np.array([[self.y1_psi1, 0.0], [self.y2_psi1, self.y2_psi2]])

    def implied_covariance(self):
        """Covariance rate of the fluctuations of ``(y1', y2')``."""
        b = self.noise_matrix()
        return b @ b.T


def replacement_coefficients(beta1=BETA1, beta2=BETA2):
    _check_betas(beta1, beta2)
    s = beta1 + beta2
    return ReplacementCoefficients(
        y1_drift=0.5,
        y1_psi1=1.0 / np.sqrt(2 * beta1),
        y2_psi1=1.0 / (s * np.sqrt(2 * beta1)),
        y2_psi2=1.0 / (s * np.sqrt(2 * beta2)),
    )


# ------------------------------------------------------------- Monte Carlo

@dataclass
class DriftDiffusionEstimate:
    drift: np.ndarray
    diffusion: np.ndarray
    drift_stderr: np.ndarray
    diffusion_stderr: np.ndarray
    z_covariance: np.ndarray
    z_covariance_stderr: np.ndarray
    ensemble_size: int
    horizon: float
    dt: float
    beta1: float
    beta2: float
    n_blowups: int = 0
    reliable: bool = True
    sample_path: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("sample_path")
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}


def _stats(y, z, T):
    drift = y.mean(axis=0) / T
    diffusion = np.cov(y, rowvar=False) / (2 * T) if len(y) > 1 else np.full((2, 2), np.nan)
    zcov = np.cov(z, rowvar=False) if len(z) > 1 else np.full((2, 2), np.nan)
    return drift, diffusion, zcov


def simulate_quad(dW, dt, beta1=BETA1, beta2=BETA2, n_burn=0, record_every=None, backend=None):
    """Run the quadratic-noise system on increments ``dW`` of shape ``(M, steps)``.

    Returns ``(records, blow_steps)`` with records ``(M, R, 4)`` ordered
    ``y1, y2, z1, z2``; ``y`` starts accumulating after ``n_burn`` steps.
    """
    dW = np.ascontiguousarray(dW, dtype=float)
    steps = dW.shape[1]
    if not 0 <= n_burn < steps:
        raise InvalidParameterError("paths must be longer than the burn-in")
    record_every = record_every or (steps - n_burn)
    return kernels.run("quad", dW, float(dt), float(beta1), float(beta2), int(n_burn),
                       int(record_every), backend=backend)


def estimate_long_time_stats(master_seed, N, T, dt=0.005, beta1=BETA1, beta2=BETA2,
                             burn_in=None, n_batches=20, chunk=512, sample_every=None,
                             backend=None):
    """Monte-Carlo drift ``mean(y(T))/T`` and diffusion ``cov(y(T))/(2T)``.

    Member ``k`` is driven by stream ``(master_seed, k)``.  Standard errors
    come from ``n_batches`` batch means over the ensemble; with fewer than
    two members per batch the estimate is flagged ``reliable=False`` and the
    errors are NaN.  Blown-up members are excluded and counted.
    """
    _check_betas(beta1, beta2)
    if N < 1:
        raise InvalidParameterError("ensemble must have at least one member")
    if not T > 0:
        raise InvalidParameterError("horizon must be positive")
    burn_in = 5.0 / beta1 if burn_in is None else burn_in
    n_burn = int(round(burn_in / dt))
    n_main = int(round(T / dt))
    T = n_main * dt
    finals = np.empty((N, 4))
    blows = np.empty(N, dtype=np.int64)
    sample = None
    for start in range(0, N, chunk):
        members = range(start, min(N, start + chunk))
        dW = ensemble_increments(master_seed, members, n_burn + n_main, dt)[:, :, 0]
        rec, blow = simulate_quad(dW, dt, beta1, beta2, n_burn, backend=backend)
        finals[start:start + len(members)] = rec[:, -1]
        blows[start:start + len(members)] = blow
        if start == 0 and sample_every:
            path, _ = simulate_quad(dW[:1], dt, beta1, beta2, n_burn, sample_every, backend)
            t = sample_every * dt * np.arange(1, path.shape[1] + 1)
            sample = np.column_stack([t, path[0]])
    ok = blows < 0
    y, z = finals[ok, :2], finals[ok, 2:]
    drift, diffusion, zcov = _stats(y, z, T)
    n_ok = int(ok.sum())
    reliable = n_ok >= 2 * n_batches
    if reliable:
        parts = [_stats(y[idx], z[idx], T) for idx in np.array_split(np.arange(n_ok), n_batches)]
        scale = 1.0 / np.sqrt(n_batches)
        drift_se = np.std([p[0] for p in parts], axis=0, ddof=1) * scale
        diff_se = np.std([p[1] for p in parts], axis=0, ddof=1) * scale
        zcov_se = np.std([p[2] for p in parts], axis=0, ddof=1) * scale
    else:
        drift_se = np.full(2, np.nan)
        diff_se = np.full((2, 2), np.nan)
        zcov_se = np.full((2, 2), np.nan)
    return DriftDiffusionEstimate(drift, diffusion, drift_se, diff_se, zcov, zcov_se, n_ok, T, dt,
                                  beta1, beta2, int(N - n_ok), reliable, sample)


# ------------------------------------------------------ effective new noise

def predicted_effective_variance_rate(psi2=PSI2_COMPONENT):
    """Variance rate of ``(z_A - 3 z_C) phi2 - 1/2`` implied by a weak-model psi coefficient.

    The normal-form quadratic noise is ``-(sigma^2 a / 44) (z_A - 3 z_C) phi2``,
    so a weak-model coefficient ``c`` on ``sigma^2 a psi`` corresponds to a
    variance rate ``(44 c)^2`` for the bare product.
    """
    c2 = PSI1_COMPONENT ** 2 + psi2 ** 2
    return 44.0 ** 2 * c2


@dataclass
class EffectiveNoiseReport:
    bin_widths: np.ndarray
    variance_rate: np.ndarray  # per bin width
    variance_rate_stderr: np.ndarray
    drift_rate: float
    correlation: np.ndarray  # with the phi2 increments, per bin width
    correlation_stderr: np.ndarray
    predicted_combined: float = 44.0 ** 2 * PSI_COMBINED ** 2
    predicted_substituted: float = 44.0 ** 2 * (PSI1_COMPONENT ** 2 + PSI2_SUBSTITUTED ** 2)
    predicted_from_diffusion: float = None

    def to_dict(self):
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}


def synthesize_effective_noise(dW, dt, bin_widths=(10.0 / BETA1,), burn_in=5.0 / BETA1,
                               beta1=BETA1, beta2=BETA2, backend=None):
    """Measure the new noise hidden in ``(z_A - 3 z_C) phi2`` along given paths.

    ``dW`` holds ``phi2`` increments, shape ``(paths, steps)`` or ``(steps,)``.
    The product is integrated in the Stratonovich sense; increments over
    coarse bins, centred on their sample mean (the drift, ``1/2`` per unit
    time in theory), give its variance rate and its correlation with the
    ``phi2`` increments over the same bins.
    """
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    n_burn = int(round(burn_in / dt))
    P, steps = dW.shape
    widths = np.atleast_1d(np.asarray(bin_widths, dtype=float))
    rec, blow = simulate_quad(dW, dt, beta1, beta2, n_burn, record_every=1, backend=backend)
    rec = rec[blow < 0]
    W = np.cumsum(dW[blow < 0, n_burn:], axis=1)
    Y = rec[:, :, 0] - 3.0 * rec[:, :, 1]
    n = Y.shape[1]
    drift = float(np.mean(Y[:, -1]) / (n * dt)) if n and len(Y) else 0.0
    var_rate = np.zeros(len(widths))
    var_se = np.zeros(len(widths))
    corr = np.zeros(len(widths))
    corr_se = np.zeros(len(widths))
    for j, w in enumerate(widths):
        per_bin = max(int(round(w / dt)), 1)
        n_bins = n // per_bin
        if n_bins < 2:
            continue
        idx = per_bin * np.arange(1, n_bins + 1) - 1
        dY = np.diff(np.concatenate([np.zeros((len(Y), 1)), Y[:, idx]], axis=1), axis=1)
        dB = np.diff(np.concatenate([np.zeros((len(W), 1)), W[:, idx]], axis=1), axis=1)
        width = per_bin * dt
        fluct = (dY - dY.mean()).ravel()
        db = dB.ravel()
        var_rate[j] = np.mean(fluct ** 2) / width
        var_se[j] = np.std(fluct ** 2, ddof=1) / width / np.sqrt(fluct.size)
        sy, sb = fluct.std(), db.std()
        if sy > 0 and sb > 0:
            corr[j] = float(np.mean((fluct - fluct.mean()) * (db - db.mean())) / (sy * sb))
            corr_se[j] = 1.0 / np.sqrt(fluct.size)
    D = theoretical_diffusion(beta1, beta2)
    from_diffusion = float(2 * (D[0, 0] - 6 * D[0, 1] + 9 * D[1, 1]))
    return EffectiveNoiseReport(widths, var_rate, var_se, drift, corr, corr_se,
                                predicted_from_diffusion=from_diffusion)

