"""Greedy stacking of machines and propagation through the stack.

A model is an ordered list of single-stack parameters whose dimensions chain:
the hidden size of stack l is the visible size of stack l+1. Forward
propagation is deterministic: per layer, each unit's conditional probability
is computed and binarized at 0.5 (a probability of exactly 0.5 rounds to 1,
which makes the zero-parameter model produce all-ones states instead of
platform-dependent noise). Gibbs equilibration and generation are stochastic
and take explicit seeds.
"""

import dataclasses

import numpy as np

from . import rbm
from .errors import ConsistencyError
from .seeding import child_seed, rng_for


@dataclasses.dataclass(frozen=True)
class DbnModel:
    """Ordered stack of trained machines; layer 0 is the visible layer."""

    stacks: tuple

    def __post_init__(self):
        stacks = tuple(self.stacks)
        if not stacks:
            raise ValueError("model needs at least one stack")
        for i in range(len(stacks) - 1):
            if stacks[i].n_hidden != stacks[i + 1].n_visible:
                raise ConsistencyError(
                    f"stack {i} emits {stacks[i].n_hidden} units but stack {i + 1} "
                    f"expects {stacks[i + 1].n_visible}"
                )
        object.__setattr__(self, "stacks", stacks)

    @property
    def layer_sizes(self):
        return [self.stacks[0].n_visible] + [s.n_hidden for s in self.stacks]

    @property
    def depth(self):
        return len(self.stacks)


@dataclasses.dataclass(frozen=True)
class StateSet:
    """M binary states observed at one hidden layer."""

    states: np.ndarray
    layer_index: int

    def __post_init__(self):
        states = np.asarray(self.states)
        if states.ndim != 2:
            raise ValueError("states must be a 2-d matrix")
        object.__setattr__(self, "states", states.astype(np.uint8))

    @property
    def n_samples(self):
        return self.states.shape[0]

    @property
    def n_units(self):
        return self.states.shape[1]

    def as_float(self):
        return self.states.astype(np.float64)


def _as_samples(dataset_or_states):
    if isinstance(dataset_or_states, StateSet):
        return dataset_or_states.as_float()
    if hasattr(dataset_or_states, "samples"):
        return np.asarray(dataset_or_states.samples, dtype=np.float64)
    return np.atleast_2d(np.asarray(dataset_or_states, dtype=np.float64))


def _binarize_step(x, params):
    probs = rbm.hidden_conditional(x, params)
    return (probs >= 0.5).astype(np.float64)


def train_dbn(dataset_or_samples, layer_sizes, config, on_epoch=None):
    """Train each stack greedily on the previous layer's binarized states.

    ``layer_sizes`` starts with the visible size. Stack seeds are derived
    from ``config.seed`` so the whole model is a function of one seed.
    ``on_epoch(stack_index, epoch_index, reconstruction_error)`` receives the
    per-epoch diagnostics of every stack.
    """
    x = _as_samples(dataset_or_samples)
    layer_sizes = [int(s) for s in layer_sizes]
    if layer_sizes[0] != x.shape[1]:
        raise ConsistencyError(
            f"layer_sizes[0]={layer_sizes[0]} does not match data dimension {x.shape[1]}"
        )
    if any(s < 1 for s in layer_sizes):
        raise ValueError("all layer sizes must be positive")

    stacks = []
    for stack_index, n_hidden in enumerate(layer_sizes[1:]):
        stack_config = dataclasses.replace(
            config, seed=child_seed(config.seed, "stack", stack_index)
        )
        callback = None
        if on_epoch is not None:
            callback = lambda epoch, err, i=stack_index: on_epoch(i, epoch, err)
        params = rbm.train_rbm(x, n_hidden, stack_config, on_epoch=callback)
        stacks.append(params)
        x = _binarize_step(x, params)
    return DbnModel(tuple(stacks))


def propagate_forward(dataset_or_states, model, target_layer):
    """Deterministic binarized propagation up to ``target_layer`` (1-based)."""
    if not 1 <= target_layer <= model.depth:
        raise ValueError(f"target_layer must be in 1..{model.depth}, got {target_layer}")
    x = _as_samples(dataset_or_states)
    start = 0
    if isinstance(dataset_or_states, StateSet):
        start = dataset_or_states.layer_index
        if start >= target_layer:
            raise ValueError("input states are already at or past the target layer")
    for params in model.stacks[start:target_layer]:
        if x.shape[1] != params.n_visible:
            raise ConsistencyError(
                f"propagated input has {x.shape[1]} units, stack expects {params.n_visible}"
            )
        x = _binarize_step(x, params)
    return StateSet(states=x, layer_index=target_layer)


def layer_states(dataset_or_samples, model, through_layer=None):
    """StateSets for layers 1..through_layer from one incremental pass."""
    if through_layer is None:
        through_layer = model.depth
    x = _as_samples(dataset_or_samples)
    out = []
    for layer, params in enumerate(model.stacks[:through_layer], start=1):
        x = _binarize_step(x, params)
        out.append(StateSet(states=x, layer_index=layer))
    return out


def gibbs_equilibrate(model, layer_index, n_steps, n_chains, seed):
    """Equilibrate ``n_chains`` random states at layer ``layer_index`` by
    alternating stochastic propagation within that layer's stack.

    One step is a full alternation: hidden -> previous layer -> hidden.
    """
    if not 1 <= layer_index <= model.depth:
        raise ValueError(f"layer_index must be in 1..{model.depth}, got {layer_index}")
    if n_steps < 1 or n_chains < 1:
        raise ValueError("n_steps and n_chains must be positive")
    params = model.stacks[layer_index - 1]
    rng = rng_for(seed, "gibbs_equilibrate", layer_index)
    h = (rng.random((n_chains, params.n_hidden)) < 0.5).astype(np.float64)
    for _ in range(n_steps):
        v = rbm.sample_state(rbm.visible_conditional(h, params), rng)
        h = rbm.sample_state(rbm.hidden_conditional(v, params), rng)
    return StateSet(states=h, layer_index=layer_index)


def generate_visible(model, states, mode="mean_field", seed=0):
    """Propagate layer states back to the visible layer.

    Intermediate layers are sampled stochastically; the final visible step
    emits conditional probabilities (``mean_field``, grayscale output) or
    binary samples (``stochastic``).
    """
    if mode not in ("mean_field", "stochastic"):
        raise ValueError(f"unknown generation mode {mode!r}")
    layer_index = states.layer_index
    if not 1 <= layer_index <= model.depth:
        raise ValueError(f"states at layer {layer_index} do not fit a depth-{model.depth} model")
    x = states.as_float()
    if x.shape[1] != model.stacks[layer_index - 1].n_hidden:
        raise ValueError(
            f"states have {x.shape[1]} units, layer {layer_index} has "
            f"{model.stacks[layer_index - 1].n_hidden}"
        )
    rng = rng_for(seed, "generate_visible", layer_index)
    for params in model.stacks[layer_index - 1 : 0 : -1]:
        x = rbm.sample_state(rbm.visible_conditional(x, params), rng)
    probs = rbm.visible_conditional(x, model.stacks[0])
    if mode == "stochastic":
        return rbm.sample_state(probs, rng)
    return probs
