"""Resolution / relevance analysis of layer state sets.

Given the M binary states a layer assigns to a dataset, everything here
derives from the multiset of state frequencies k_s:

* resolution  H[s] = -sum_s (k_s/M) log(k_s/M), the average information cost
  of addressing one sample at that layer;
* relevance   H[k] = -sum_k (k*m_k/M) log(k*m_k/M), where m_k counts the
  distinct states sharing frequency k; the mean degeneracy entropy is
  <S> = log M - H[k];
* the degeneracy spectrum (k, m_k), whose power-law shape m_k ~ k^(-beta-1)
  is summarized by the fitted exponent beta;
* the theoretical ceiling: the frequency distribution maximizing H[k] at
  fixed H[s] is m_k = c * k^(-beta-1) (continuous relaxation over
  k = 1..M), traced as a parametric curve in the (H[s], H[k]) plane whose
  local slope is -beta.

All entropies are in nats; reports additionally carry values normalized by
log M.
"""

import dataclasses
import math

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from . import dbn
from .errors import FitError

#: Layers with fewer distinct frequencies than this cannot be fit.
MIN_FIT_POINTS = 3


@dataclasses.dataclass(frozen=True)
class StateHistogram:
    """Map from distinct state (any hashable key) to its frequency."""

    counts: dict

    def __post_init__(self):
        if not self.counts:
            raise ValueError("histogram must contain at least one state")
        if any(int(k) < 1 for k in self.counts.values()):
            raise ValueError("all frequencies must be positive")
        object.__setattr__(self, "counts", dict(self.counts))

    @property
    def total(self):
        """M, the number of underlying samples."""
        return int(sum(self.counts.values()))

    @property
    def frequencies(self):
        return np.fromiter(self.counts.values(), dtype=np.int64, count=len(self.counts))

    @classmethod
    def from_frequencies(cls, frequencies):
        return cls({i: int(k) for i, k in enumerate(frequencies)})


@dataclasses.dataclass(frozen=True)
class DegeneracySpectrum:
    """Number of distinct states m_k at each occurring frequency k."""

    k_values: np.ndarray
    m_values: np.ndarray
    total: int

    def __post_init__(self):
        k = np.asarray(self.k_values, dtype=np.int64)
        m = np.asarray(self.m_values, dtype=np.int64)
        if k.shape != m.shape or k.ndim != 1:
            raise ValueError("k_values and m_values must be matching vectors")
        if (m < 1).any():
            raise ValueError("listed degeneracies must be positive")
        if int((k * m).sum()) != self.total:
            raise ValueError("spectrum does not satisfy sum_k k*m_k = M")
        object.__setattr__(self, "k_values", k)
        object.__setattr__(self, "m_values", m)


@dataclasses.dataclass(frozen=True)
class PowerLawFit:
    """Least-squares exponent for m_k ~ k^(-beta-1) with an MLE cross-check."""

    beta: float
    stderr: float
    r_squared: float
    beta_mle: float
    n_bins: int


@dataclasses.dataclass(frozen=True)
class RraPoint:
    """Per-layer summary in the resolution/relevance plane."""

    layer_index: int
    resolution: float
    relevance: float
    resolution_norm: float
    relevance_norm: float
    beta: float | None
    beta_stderr: float | None
    fit_r_squared: float | None
    n_distinct_states: int


@dataclasses.dataclass(frozen=True)
class LayerReport:
    points: list
    critical_layer: int

    def point(self, layer_index):
        for p in self.points:
            if p.layer_index == layer_index:
                return p
        raise KeyError(layer_index)


@dataclasses.dataclass(frozen=True)
class MaxRelevanceCurve:
    """Parametric ceiling (beta, H[s], H[k]) for a given sample count M."""

    beta_values: np.ndarray
    resolution: np.ndarray
    relevance: np.ndarray
    total: int

    def relevance_bound(self, resolution):
        """Interpolated maximal H[k] at the given H[s] value(s)."""
        order = np.argsort(self.resolution)
        return np.interp(resolution, self.resolution[order], self.relevance[order])


def _states_array(state_set):
    if isinstance(state_set, dbn.StateSet):
        return state_set.states
    states = np.asarray(state_set)
    if states.ndim != 2:
        raise ValueError("state set must be a 2-d binary matrix")
    return states.astype(np.uint8)


def count_states(state_set):
    """Exact multiset count of distinct binary states."""
    states = _states_array(state_set)
    if states.shape[0] < 1:
        raise ValueError("state set must be non-empty")
    packed = np.packbits(states, axis=1)
    uniq, counts = np.unique(packed, axis=0, return_counts=True)
    return StateHistogram({row.tobytes(): int(c) for row, c in zip(uniq, counts)})


def resolution_entropy(hist):
    """H[s] in nats; 0 when all samples share a state, log M when all differ."""
    k = hist.frequencies.astype(np.float64)
    p = k / k.sum()
    return float(-(p * np.log(p)).sum())


def degeneracy_spectrum(hist):
    k, m = np.unique(hist.frequencies, return_counts=True)
    return DegeneracySpectrum(k_values=k, m_values=m, total=hist.total)


def relevance_entropy(hist):
    """H[k] in nats: the entropy of the frequency-of-frequencies weights."""
    spectrum = degeneracy_spectrum(hist)
    w = spectrum.k_values * spectrum.m_values / hist.total
    return float(-(w * np.log(w)).sum())


def mean_degeneracy_entropy(hist):
    """<S> = log M - H[k]."""
    return math.log(hist.total) - relevance_entropy(hist)


def information_cost(k, total):
    """Nats needed to store one sample that falls in a state of frequency k."""
    if not 1 <= k <= total:
        raise ValueError(f"frequency {k} outside 1..{total}")
    return float(-math.log(k / total))


def _log_binned_densities(spectrum, gamma):
    """Factor-2 logarithmic binning of (k, m_k) into density points.

    Each bin [2^j, 2^(j+1)) is summarized by its total state count divided by
    the number of integer frequencies it spans (zeros included, so sparse
    high-k bins are averaged correctly); the bin beyond the largest occurring
    k is cut there. The bin's abscissa is placed where a continuum k^-gamma
    density equals the bin's discrete average, which removes the small-k
    discretization curvature that a fixed geometric midpoint introduces.
    Returns (log k, log density, mass) per non-empty bin.
    """
    k = spectrum.k_values
    m = spectrum.m_values
    k_max = int(k.max())
    edges = [1]
    while edges[-1] <= k_max:
        edges.append(edges[-1] * 2)
    xs, ys, mass = [], [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        hi = min(hi, k_max + 1)
        inside = (k >= lo) & (k < hi)
        if not inside.any():
            continue
        width = hi - lo
        density = m[inside].sum() / width
        span = np.arange(lo, hi, dtype=np.float64)
        if abs(gamma) < 0.05:
            k_rep = math.exp(float(np.log(span).mean()))
        else:
            k_rep = float(np.mean(span ** (-gamma)) ** (-1.0 / gamma))
        xs.append(math.log(k_rep))
        ys.append(math.log(density))
        mass.append(float(m[inside].sum()))
    return np.array(xs), np.array(ys), np.array(mass)


def _mle_exponent(spectrum):
    """Discrete maximum-likelihood exponent gamma for p(k) ~ k^-gamma, k>=1."""
    n_states = float(spectrum.m_values.sum())
    sum_log_k = float((spectrum.m_values * np.log(spectrum.k_values)).sum())
    if sum_log_k == 0.0:
        return math.inf

    def nll(gamma):
        return gamma * sum_log_k + n_states * math.log(zeta(gamma))

    result = minimize_scalar(nll, bounds=(1.000001, 16.0), method="bounded")
    return float(result.x)


def fit_power_law(spectrum):
    """Estimate beta in m_k ~ k^(-beta-1).

    Primary estimate: weighted least squares on factor-2 log-binned
    (log k, log m_k) densities, weighted by the state mass per bin, with the
    bin abscissa made self-consistent with the fitted exponent (a few fixed
    iterations). The discrete MLE over the per-state frequencies is returned
    as a diagnostic, and the weighted R^2 of the binned fit as
    goodness-of-fit.
    """
    if len(spectrum.k_values) < MIN_FIT_POINTS:
        raise FitError(
            f"spectrum has {len(spectrum.k_values)} distinct frequencies, "
            f"need at least {MIN_FIT_POINTS}"
        )

    gamma = 2.0
    slope = stderr = r_squared = None
    for _ in range(4):
        x, y, w = _log_binned_densities(spectrum, gamma)
        if len(x) < MIN_FIT_POINTS:
            raise FitError(f"only {len(x)} populated bins, need at least {MIN_FIT_POINTS}")
        w = w / w.sum()
        x_bar = (w * x).sum()
        y_bar = (w * y).sum()
        s_xx = (w * (x - x_bar) ** 2).sum()
        s_xy = (w * (x - x_bar) * (y - y_bar)).sum()
        if s_xx == 0.0:
            raise FitError("all bins share one representative frequency")
        slope = s_xy / s_xx
        intercept = y_bar - slope * x_bar
        residuals = y - (intercept + slope * x)
        ss_res = (w * residuals**2).sum()
        ss_tot = (w * (y - y_bar) ** 2).sum()
        r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
        dof = max(len(x) - 2, 1)
        stderr = math.sqrt(max(ss_res, 0.0) / dof / s_xx)
        gamma = -slope

    beta = -slope - 1.0
    beta_mle = _mle_exponent(spectrum) - 1.0
    return PowerLawFit(
        beta=float(beta),
        stderr=float(stderr),
        r_squared=float(r_squared),
        beta_mle=beta_mle,
        n_bins=len(x),
    )


def max_relevance_curve(total, beta_grid=None):
    """The maximal-H[k] family m_k = c * k^(-beta-1), k = 1..M, continuous m_k.

    For each beta the normalization c is fixed by sum_k k*m_k = M; the curve
    point is (H[s], H[k]) of that frequency distribution. Larger beta means
    higher resolution, and the local slope dH[k]/dH[s] equals -beta.
    """
    if total < 2:
        raise ValueError("need at least two samples")
    if beta_grid is None:
        beta_grid = default_beta_grid()
    beta_grid = np.asarray(beta_grid, dtype=np.float64)
    log_k = np.log(np.arange(1, total + 1, dtype=np.float64))
    log_m_total = math.log(total)
    resolution = np.empty(len(beta_grid))
    relevance = np.empty(len(beta_grid))
    for i, beta in enumerate(beta_grid):
        # weights w_k = k*m_k / M, i.e. w_k ~ k^-beta normalized
        log_w = -beta * log_k
        log_w -= log_w.max()
        w = np.exp(log_w)
        w /= w.sum()
        nonzero = w > 0.0
        resolution[i] = log_m_total - float((w * log_k).sum())
        relevance[i] = float(-(w[nonzero] * np.log(w[nonzero])).sum())
    return MaxRelevanceCurve(
        beta_values=beta_grid, resolution=resolution, relevance=relevance, total=total
    )


def default_beta_grid():
    """Grid wide and dense enough to span (0, log M) in resolution."""
    return np.linspace(-12.0, 12.0, 961)


def point_from_states(state_set, layer_index=None):
    """RraPoint for one layer's states (histogram, entropies, fit)."""
    states = _states_array(state_set)
    if layer_index is None:
        layer_index = getattr(state_set, "layer_index", 0)
    hist = count_states(states)
    total = hist.total
    log_m = math.log(total)
    h_s = resolution_entropy(hist)
    h_k = relevance_entropy(hist)
    beta = stderr = r_squared = None
    try:
        fit = fit_power_law(degeneracy_spectrum(hist))
        beta, stderr, r_squared = fit.beta, fit.stderr, fit.r_squared
    except FitError:
        pass
    return RraPoint(
        layer_index=layer_index,
        resolution=h_s,
        relevance=h_k,
        resolution_norm=h_s / log_m if log_m > 0 else 0.0,
        relevance_norm=h_k / log_m if log_m > 0 else 0.0,
        beta=beta,
        beta_stderr=stderr,
        fit_r_squared=r_squared,
        n_distinct_states=len(hist.counts),
    )


def layer_report(model, dataset_or_samples, states=None):
    """Propagate the data to every layer and summarize each one.

    The critical layer is the one maximizing H[s] + H[k]. Precomputed
    ``states`` (a list of StateSets) may be passed to avoid re-propagation.
    """
    if states is None:
        states = dbn.layer_states(dataset_or_samples, model)
    points = [point_from_states(s) for s in states]
    critical = max(points, key=lambda p: p.resolution + p.relevance).layer_index
    return LayerReport(points=points, critical_layer=critical)


def write_state_dump(path, state_set):
    """One state per line as a 0/1 string."""
    states = _states_array(state_set)
    with open(path, "w", encoding="ascii") as f:
        for row in states:
            f.write("".join("1" if v else "0" for v in row))
            f.write("\n")


def read_state_dump(path):
    """Read a 0/1-string state dump into a binary matrix."""
    rows = []
    width = None
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if set(line) - {"0", "1"}:
                raise ValueError(f"{path}:{lineno}: states must be 0/1 strings")
            if width is None:
                width = len(line)
            elif len(line) != width:
                raise ValueError(f"{path}:{lineno}: inconsistent state width")
            rows.append(np.frombuffer(line.encode("ascii"), dtype=np.uint8) - ord("0"))
    if not rows:
        raise ValueError(f"{path}: no states")
    return np.vstack(rows)
