"""
Coordinate Network Machinery
============================

Positional encoding, small fully-connected networks, reverse-mode gradient
accumulation and Adam, all in torch float64.

- ``mlp_forward`` returns the output together with a ``Tape`` (the autograd
  graph of that call).
- ``mlp_backward`` adds parameter gradients into ``.grad`` buffers and
  returns the input gradient of that call.
- ``ParamStore`` groups named tensors with their gradient buffers, one Adam
  optimizer and a step counter.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.core.geometry import DTYPE
from src.utils.exceptions import ShapeMismatchError, TapeMismatchError, ValidationError

logger = logging.getLogger(__name__)

ACTIVATIONS: Dict[str, Callable[[torch.Tensor], torch.Tensor]] = {
    'relu': F.relu,
    'softplus': F.softplus,
    'tanh': torch.tanh,
}


# =============================================================================
# Positional encoding
# =============================================================================

def encoded_width(dim: int, freqs: int) -> int:
    return dim * (1 + 2 * freqs)


def positional_encode(x: torch.Tensor, freqs: int) -> torch.Tensor:
    """
    [x, sin(2^0 πx), cos(2^0 πx), ..., sin(2^(F-1) πx), cos(2^(F-1) πx)]

    Args:
        x: (..., D) coordinates
        freqs: frequency count F (0 returns x unchanged)
    """
    if freqs < 0:
        raise ValidationError('freqs', freqs, 'freqs >= 0')
    x = torch.as_tensor(x, dtype=DTYPE)
    out = [x]
    for k in range(freqs):
        scaled = x * ((2.0 ** k) * math.pi)
        out.append(torch.sin(scaled))
        out.append(torch.cos(scaled))
    return torch.cat(out, dim=-1)


# =============================================================================
# MLP
# =============================================================================

@dataclass(frozen=True)
class MlpSpec:
    """
    Fully-connected network layout

    Attributes:
        in_dim: raw input width (before encoding)
        hidden: hidden layer widths
        out_dim: output width
        activation: 'relu' | 'softplus' | 'tanh'
        freqs: positional-encoding frequencies applied to the whole input (0 disables)
    """
    in_dim: int
    hidden: Tuple[int, ...]
    out_dim: int
    activation: str = 'softplus'
    freqs: int = 0

    def __post_init__(self):
        widths = (self.in_dim, *self.hidden, self.out_dim)
        if any(w <= 0 for w in widths):
            raise ValidationError('widths', widths, 'all widths > 0')
        if self.freqs < 0:
            raise ValidationError('freqs', self.freqs, 'freqs >= 0')
        if self.activation not in ACTIVATIONS:
            raise ValidationError('activation', self.activation, f"one of {sorted(ACTIVATIONS)}")

    @property
    def encoded_dim(self) -> int:
        return encoded_width(self.in_dim, self.freqs)


class Mlp(nn.Module):
    """
    Plain MLP built from an ``MlpSpec``.

    Hidden layers use Kaiming-uniform fan-in init with zero biases. The final
    layer can be shrunk (``final_scale``) and offset (``final_bias``) so heads
    start near a chosen output.
    """

    def __init__(self, spec: MlpSpec, final_scale: float = 1.0, final_bias: float = 0.0):
        super().__init__()
        self.spec = spec
        widths = (spec.encoded_dim, *spec.hidden, spec.out_dim)
        self.layers = nn.ModuleList(
            nn.Linear(a, b, dtype=DTYPE) for a, b in zip(widths[:-1], widths[1:])
        )
        self._act = ACTIVATIONS[spec.activation]
        self.reset_parameters(final_scale, final_bias)

    def reset_parameters(self, final_scale: float = 1.0, final_bias: float = 0.0):
        for layer in self.layers:
            nn.init.kaiming_uniform_(layer.weight, nonlinearity='relu')
            nn.init.zeros_(layer.bias)
        with torch.no_grad():
            self.layers[-1].weight.mul_(final_scale)
            self.layers[-1].bias.fill_(final_bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.spec.in_dim:
            raise ShapeMismatchError('mlp_input', tuple(x.shape), (..., self.spec.in_dim))
        h = positional_encode(x, self.spec.freqs) if self.spec.freqs else x
        for layer in self.layers[:-1]:
            h = self._act(layer(h))
        return self.layers[-1](h)


# =============================================================================
# Tape-based forward / backward
# =============================================================================

@dataclass
class Tape:
    """Activation record of one ``mlp_forward`` call"""
    module: nn.Module
    input: torch.Tensor
    output: torch.Tensor


def mlp_forward(mlp: nn.Module, x: torch.Tensor) -> Tuple[torch.Tensor, Tape]:
    """Evaluate ``mlp`` on ``x``; the tape holds the graph for ``mlp_backward``"""
    x_leaf = torch.as_tensor(x, dtype=DTYPE).detach().clone().requires_grad_(True)
    with torch.enable_grad():
        out = mlp(x_leaf)
    return out.detach(), Tape(mlp, x_leaf, out)


def mlp_backward(tape: Tape, output_grad: torch.Tensor,
                 store: Optional['ParamStore'] = None) -> torch.Tensor:
    """
    Accumulate dL/dθ into the ``.grad`` buffers of the tape's parameters and
    return dL/dinput for this call.

    Raises:
        ShapeMismatchError: output_grad shape differs from the forward output
        TapeMismatchError: the tape's parameters are not held by ``store``
    """
    output_grad = torch.as_tensor(output_grad, dtype=DTYPE)
    if output_grad.shape != tape.output.shape:
        raise ShapeMismatchError('output_grad', tuple(output_grad.shape), tuple(tape.output.shape))

    params = [p for p in tape.module.parameters() if p.requires_grad]
    if store is not None and not store.owns(params):
        raise TapeMismatchError(f"{type(tape.module).__name__} parametreleri bu depoda değil")

    grads = torch.autograd.grad(
        tape.output, [tape.input, *params], grad_outputs=output_grad,
        retain_graph=True, allow_unused=True,
    )
    for p, g in zip(params, grads[1:]):
        if g is None:
            continue
        if p.grad is None:
            p.grad = torch.zeros_like(p)
        p.grad.add_(g)

    input_grad = grads[0]
    return torch.zeros_like(tape.input) if input_grad is None else input_grad.detach()


# =============================================================================
# ParamStore + Adam
# =============================================================================

LrSpec = Union[None, float, Dict[str, float]]


@dataclass
class ParamGroup:
    name: str
    base_lr: float
    names: List[str] = field(default_factory=list)


class ParamStore:
    """
    Named learnable tensors with gradient buffers, Adam moments and a step counter.

    Every tensor gets a zero ``.grad`` buffer on registration. Frozen tensors
    keep ``requires_grad=False`` and never enter the optimizer, so they stay
    bit-identical across steps.
    """

    def __init__(self, named_params: Iterable[Tuple[str, torch.Tensor]],
                 group_of: Optional[Callable[[str], str]] = None,
                 base_lrs: Optional[Dict[str, float]] = None,
                 frozen: Callable[[str], bool] = lambda name: False,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params: Dict[str, torch.Tensor] = {}
        self.frozen: List[str] = []
        self.step = 0

        group_of = group_of or (lambda name: 'default')
        base_lrs = dict(base_lrs or {'default': 1e-3})
        groups: Dict[str, ParamGroup] = {}

        for name, tensor in named_params:
            self.params[name] = tensor
            if frozen(name):
                tensor.requires_grad_(False)
                self.frozen.append(name)
                continue
            tensor.requires_grad_(True)
            if tensor.grad is None:
                tensor.grad = torch.zeros_like(tensor)
            gname = group_of(name)
            if gname not in base_lrs:
                raise ValidationError('param_group', gname, f"one of {sorted(base_lrs)}")
            groups.setdefault(gname, ParamGroup(gname, base_lrs[gname])).names.append(name)

        self.groups = list(groups.values())
        self.optimizer: Optional[torch.optim.Adam] = None
        if self.groups:
            self.optimizer = torch.optim.Adam(
                [{'params': [self.params[n] for n in g.names], 'lr': g.base_lr, 'name': g.name}
                 for g in self.groups],
                betas=betas, eps=eps,
            )
        self._ids = {id(t) for t in self.params.values()}
        logger.debug(f"ParamStore: {len(self.params)} tensör, {len(self.frozen)} donuk, "
                     f"gruplar={[g.name for g in self.groups]}")

    @classmethod
    def from_module(cls, module: nn.Module, **kwargs) -> 'ParamStore':
        return cls(module.named_parameters(), **kwargs)

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __getitem__(self, name: str) -> torch.Tensor:
        return self.params[name]

    def owns(self, tensors: Iterable[torch.Tensor]) -> bool:
        return all(id(t) in self._ids for t in tensors)

    def trainable(self) -> Dict[str, torch.Tensor]:
        return {n: t for n, t in self.params.items() if t.requires_grad}

    def zero_grads(self):
        for tensor in self.trainable().values():
            if tensor.grad is None:
                tensor.grad = torch.zeros_like(tensor)
            else:
                tensor.grad.zero_()

    def mask_grads(self, prefix: str):
        """Zero the gradients of every tensor whose name starts with ``prefix``"""
        for name, tensor in self.trainable().items():
            if name.startswith(prefix) and tensor.grad is not None:
                tensor.grad.zero_()

    def grad_norm(self) -> float:
        total = sum(float((t.grad ** 2).sum()) for t in self.trainable().values() if t.grad is not None)
        return math.sqrt(total)

    def state_dict(self) -> dict:
        return {
            'step': self.step,
            'optimizer': self.optimizer.state_dict() if self.optimizer is not None else None,
        }

    def load_state_dict(self, state: dict):
        self.step = int(state['step'])
        if self.optimizer is not None and state.get('optimizer') is not None:
            self.optimizer.load_state_dict(state['optimizer'])


def adam_step(store: ParamStore, lr: LrSpec = None,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """
    One bias-corrected Adam update over the trainable tensors of ``store``.

    Args:
        lr: None keeps each group's base rate; a float sets every group; a dict
            maps group name to rate.
    """
    if store.optimizer is None:
        store.step += 1
        return

    for group in store.optimizer.param_groups:
        if isinstance(lr, dict):
            group['lr'] = lr.get(group['name'], group['lr'])
        elif lr is not None:
            group['lr'] = float(lr)
        group['betas'] = (beta1, beta2)
        group['eps'] = eps

    store.optimizer.step()
    store.step += 1


def cosine_lr_scale(iteration: int, total: int, floor: float) -> float:
    """Cosine decay from 1 to ``floor`` over ``total`` iterations"""
    if total <= 1:
        return 1.0
    progress = min(max(iteration / (total - 1), 0.0), 1.0)
    return floor + (1.0 - floor) * 0.5 * (1.0 + math.cos(math.pi * progress))
