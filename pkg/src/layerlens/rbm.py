"""Restricted Boltzmann machine core.

Conventions: a machine has V visible and H hidden binary units coupled by a
V x H weight matrix plus per-unit biases. The energy of a joint state is

    E(v, h) = -v.W.h - v.a - h.b

and states are distributed as P(v, h) = exp(-E(v, h)) / Z. Visible units may
carry real values in [0, 1] (mean activities); hidden units are binary.

Everything stochastic takes an explicit numpy Generator so results are exact
functions of the seed. The ``exact_*`` functions enumerate small machines and
serve as oracles for the sampling-based estimators; they are guarded by
``ENUMERATION_LIMIT`` on V + H.
"""

import dataclasses

import numpy as np
from scipy.special import expit, logsumexp

from .errors import CapacityError, DivergenceError
from .seeding import rng_for

ENUMERATION_LIMIT = 24

# Training aborts when any parameter magnitude passes this bound.
PARAMETER_BOUND = 1e6


@dataclasses.dataclass(frozen=True)
class RbmParams:
    """Couplings and biases of one machine: weights is V x H, visible_bias
    has length V, hidden_bias length H."""

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        a = np.asarray(self.visible_bias, dtype=np.float64)
        b = np.asarray(self.hidden_bias, dtype=np.float64)
        if w.ndim != 2 or a.ndim != 1 or b.ndim != 1:
            raise ValueError("weights must be a matrix and biases vectors")
        if w.shape != (a.shape[0], b.shape[0]):
            raise ValueError(
                f"inconsistent shapes: weights {w.shape}, visible_bias {a.shape}, "
                f"hidden_bias {b.shape}"
            )
        if not (np.isfinite(w).all() and np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "visible_bias", a)
        object.__setattr__(self, "hidden_bias", b)

    @property
    def n_visible(self):
        return self.weights.shape[0]

    @property
    def n_hidden(self):
        return self.weights.shape[1]


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for single-stack training.

    ``epochs`` counts full passes over the data (one parameter update per
    mini-batch). ``weight_penalty`` and ``activity_penalty`` are the L2
    coefficients on the couplings and on the deviation of mean hidden
    activity from ``activity_target``.
    """

    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 100
    cd_steps: int = 1
    persistent: bool = True
    weight_penalty: float = 0.0
    activity_penalty: float = 0.0
    activity_target: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.cd_steps < 1:
            raise ValueError("cd_steps must be positive")
        if self.weight_penalty < 0 or self.activity_penalty < 0:
            raise ValueError("penalties must be non-negative")
        if not 0.0 <= self.activity_target <= 1.0:
            raise ValueError("activity_target must lie in [0, 1]")


@dataclasses.dataclass
class Gradients:
    d_weights: np.ndarray
    d_visible_bias: np.ndarray
    d_hidden_bias: np.ndarray

    def norm(self):
        return float(
            np.sqrt(
                np.sum(self.d_weights**2)
                + np.sum(self.d_visible_bias**2)
                + np.sum(self.d_hidden_bias**2)
            )
        )


class PcdState:
    """Persistent fantasy chains for PCD; updated in place by cd_gradient."""

    def __init__(self, visible, hidden):
        self.visible = np.asarray(visible, dtype=np.float64)
        self.hidden = np.asarray(hidden, dtype=np.float64)

    @classmethod
    def fresh(cls, params, n_chains, rng):
        v = (rng.random((n_chains, params.n_visible)) < 0.5).astype(np.float64)
        h = (rng.random((n_chains, params.n_hidden)) < 0.5).astype(np.float64)
        return cls(v, h)


def energy(v, h, params):
    """E(v, h) = -v.W.h - v.a - h.b for a single joint state."""
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if v.shape != (params.n_visible,) or h.shape != (params.n_hidden,):
        raise ValueError(
            f"state shapes {v.shape}, {h.shape} do not match model "
            f"({params.n_visible}, {params.n_hidden})"
        )
    return float(-(v @ params.weights @ h) - v @ params.visible_bias - h @ params.hidden_bias)


def hidden_conditional(v, params):
    """P(h_j = 1 | v) for one state or a batch of states (rows)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != params.n_visible:
        raise ValueError(f"visible dimension {v.shape[-1]} != {params.n_visible}")
    return expit(v @ params.weights + params.hidden_bias)


def visible_conditional(h, params):
    """P(v_i = 1 | h) for one state or a batch of states (rows)."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params.n_hidden:
        raise ValueError(f"hidden dimension {h.shape[-1]} != {params.n_hidden}")
    return expit(h @ params.weights.T + params.visible_bias)


def sample_state(probs, rng):
    """Independent Bernoulli draws; returns 0/1 floats of the same shape."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return (rng.random(probs.shape) < probs).astype(np.float64)


def gibbs_steps(v0, params, n, rng):
    """Run n alternations v -> h -> v starting from v0, plus a final hidden
    update, returning the end-of-chain (v, h) binary samples."""
    v = np.asarray(v0, dtype=np.float64)
    h = sample_state(hidden_conditional(v, params), rng)
    for _ in range(n):
        v = sample_state(visible_conditional(h, params), rng)
        h = sample_state(hidden_conditional(v, params), rng)
    return v, h


def enumerate_states(n):
    """All 2^n binary states as rows, row i being the binary digits of i."""
    if n > ENUMERATION_LIMIT:
        raise CapacityError(f"cannot enumerate {n} units")
    idx = np.arange(2**n, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return bits.astype(np.float64)


def _check_enumerable(params):
    total = params.n_visible + params.n_hidden
    if total > ENUMERATION_LIMIT:
        raise CapacityError(
            f"model has {total} units, exact enumeration is limited to {ENUMERATION_LIMIT}"
        )


def _softplus(x):
    return np.logaddexp(0.0, x)


def exact_log_partition(params):
    """log Z as the exact sum over all 2^(V+H) joint states.

    The smaller layer is enumerated explicitly and the other is summed
    analytically (the factorized conditionals make that sum a product of
    1 + exp terms), which is algebraically identical to the full double sum
    but needs only 2^min(V, H) terms in the log-sum-exp.
    """
    _check_enumerable(params)
    w, a, b = params.weights, params.visible_bias, params.hidden_bias
    if params.n_hidden <= params.n_visible:
        states = enumerate_states(params.n_hidden)
        terms = states @ b + _softplus(a + states @ w.T).sum(axis=1)
    else:
        states = enumerate_states(params.n_visible)
        terms = states @ a + _softplus(b + states @ w).sum(axis=1)
    return float(logsumexp(terms))


def exact_joint_distribution(params):
    """The full joint P(v, h) over all binary states of a small machine.

    Returns (visible_states, hidden_states, probs) where probs[i, j] is the
    probability of (visible_states[i], hidden_states[j]). Intended for tiny
    oracles; memory grows as 2^(V+H).
    """
    _check_enumerable(params)
    vs = enumerate_states(params.n_visible)
    hs = enumerate_states(params.n_hidden)
    neg_energy = (
        vs @ params.weights @ hs.T
        + (vs @ params.visible_bias)[:, None]
        + (hs @ params.hidden_bias)[None, :]
    )
    log_z = logsumexp(neg_energy)
    return vs, hs, np.exp(neg_energy - log_z)


def exact_log_likelihood(samples, params):
    """Exact data log-likelihood: sum_mu log sum_h exp(-E(v_mu, h)) - M log Z."""
    _check_enumerable(params)
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    free = samples @ params.visible_bias + _softplus(
        params.hidden_bias + samples @ params.weights
    ).sum(axis=1)
    return float(free.sum() - samples.shape[0] * exact_log_partition(params))


def exact_gradient(samples, params):
    """Exact log-likelihood gradient (per sample) by enumeration.

    The data term marginalizes the hidden layer analytically; the model term
    enumerates the hidden layer and uses the factorized visible conditional,
    both exact.
    """
    _check_enumerable(params)
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    m = samples.shape[0]
    ph = hidden_conditional(samples, params)
    pos_w = samples.T @ ph / m
    pos_a = samples.mean(axis=0)
    pos_b = ph.mean(axis=0)

    hs = enumerate_states(params.n_hidden)
    log_weights = hs @ params.hidden_bias + _softplus(
        params.visible_bias + hs @ params.weights.T
    ).sum(axis=1)
    p_h = np.exp(log_weights - logsumexp(log_weights))
    mean_v_given_h = expit(params.visible_bias + hs @ params.weights.T)
    neg_w = (mean_v_given_h * p_h[:, None]).T @ hs
    neg_a = p_h @ mean_v_given_h
    neg_b = p_h @ hs

    return Gradients(pos_w - neg_w, pos_a - neg_a, pos_b - neg_b)


def cd_gradient(batch, params, n, rng, pcd_state=None):
    """Contrastive-divergence estimate of the log-likelihood gradient.

    The positive phase pairs the data with its mean-field hidden
    probabilities; the negative phase pairs binary end-of-chain samples after
    n Gibbs alternations, started from the batch (CD) or from the persistent
    fantasy chains (PCD, updated in place). Both phases are averaged over
    their rows.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[0] < 1:
        raise ValueError("batch must be non-empty")
    if batch.shape[1] != params.n_visible:
        raise ValueError(f"batch dimension {batch.shape[1]} != {params.n_visible}")
    if n < 1:
        raise ValueError("n must be at least 1")

    ph = hidden_conditional(batch, params)
    m = batch.shape[0]
    pos_w = batch.T @ ph / m
    pos_a = batch.mean(axis=0)
    pos_b = ph.mean(axis=0)

    start = batch if pcd_state is None else pcd_state.visible
    v_end, h_end = gibbs_steps(start, params, n, rng)
    if pcd_state is not None:
        pcd_state.visible = v_end
        pcd_state.hidden = h_end
    c = v_end.shape[0]
    neg_w = v_end.T @ h_end / c
    neg_a = v_end.mean(axis=0)
    neg_b = h_end.mean(axis=0)

    return Gradients(pos_w - neg_w, pos_a - neg_a, pos_b - neg_b)


def _activity_penalty_gradient(batch, ph, target, coefficient):
    """Gradient of coefficient * sum_j (target - mean_mu P(h_j=1|v_mu))^2
    with the mean taken over the batch."""
    q = ph.mean(axis=0)
    slope = ph * (1.0 - ph)
    outer = 2.0 * coefficient * (q - target)
    d_b = outer * slope.mean(axis=0)
    d_w = batch.T @ slope / batch.shape[0] * outer
    return d_w, d_b


def train_rbm(samples, n_hidden, config, on_epoch=None):
    """Fit one machine to the sample matrix by seeded mini-batch CD/PCD.

    Each epoch runs one seeded shuffle of the data and one update per
    mini-batch:

        theta <- theta + alpha * (mean CD/PCD gradient - penalty gradient)

    Raises DivergenceError naming the epoch if parameters leave the finite
    range. ``on_epoch(epoch_index, reconstruction_error)`` is invoked after
    every epoch with the mean squared one-step reconstruction error.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    m, n_visible = samples.shape
    if m < 1:
        raise ValueError("dataset must be non-empty")
    if config.batch_size > m:
        raise ValueError(f"batch_size {config.batch_size} exceeds dataset size {m}")

    rng = rng_for(config.seed, "train_rbm")
    rng_diag = rng_for(config.seed, "train_rbm", "diagnostics")
    w = rng.normal(0.0, 0.01, size=(n_visible, n_hidden))
    a = np.zeros(n_visible)
    b = np.zeros(n_hidden)
    alpha = config.learning_rate

    pcd = None
    if config.persistent:
        pcd = PcdState.fresh(RbmParams(w, a, b), config.batch_size, rng)

    for epoch in range(config.epochs):
        order = rng.permutation(m)
        recon_sum = 0.0
        for lo in range(0, m, config.batch_size):
            batch = samples[order[lo : lo + config.batch_size]]
            params = RbmParams(w, a, b)
            grad = cd_gradient(batch, params, config.cd_steps, rng, pcd)
            d_w = grad.d_weights
            d_a = grad.d_visible_bias
            d_b = grad.d_hidden_bias
            if config.weight_penalty > 0.0:
                d_w = d_w - 2.0 * config.weight_penalty * w
            if config.activity_penalty > 0.0:
                ph = hidden_conditional(batch, params)
                pen_w, pen_b = _activity_penalty_gradient(
                    batch, ph, config.activity_target, config.activity_penalty
                )
                d_w = d_w - pen_w
                d_b = d_b - pen_b
            w = w + alpha * d_w
            a = a + alpha * d_a
            b = b + alpha * d_b
            if (
                not (np.isfinite(w).all() and np.isfinite(a).all() and np.isfinite(b).all())
                or max(np.abs(w).max(), np.abs(a).max(), np.abs(b).max()) > PARAMETER_BOUND
            ):
                raise DivergenceError(f"training diverged at epoch {epoch}", epoch=epoch)

            updated = RbmParams(w, a, b)
            recon = visible_conditional(
                sample_state(hidden_conditional(batch, updated), rng_diag), updated
            )
            recon_sum += float(((batch - recon) ** 2).mean()) * batch.shape[0]

        if on_epoch is not None:
            on_epoch(epoch, recon_sum / m)

    return RbmParams(w, a, b)
