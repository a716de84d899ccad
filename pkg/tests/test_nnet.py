"""
MLP, konumsal kodlama, ters mod gradyan ve Adam testleri
"""

import math

import pytest
import torch
import torch.nn as nn

from src.core.geometry import DTYPE
from src.ml_engine.nnet import (
    Mlp, MlpSpec, ParamStore, adam_step, cosine_lr_scale, encoded_width, mlp_backward,
    mlp_forward, positional_encode,
)
from src.utils.exceptions import ShapeMismatchError, TapeMismatchError, ValidationError


def central_difference(fn, tensor: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    grad = torch.zeros_like(tensor)
    flat = tensor.view(-1)
    for i in range(flat.numel()):
        old = float(flat[i])
        flat[i] = old + eps
        plus = float(fn())
        flat[i] = old - eps
        minus = float(fn())
        flat[i] = old
        grad.view(-1)[i] = (plus - minus) / (2 * eps)
    return grad


class TestPositionalEncoding:

    def test_width_and_values(self):
        x = torch.tensor([[0.25, -0.5, 1.0]], dtype=DTYPE)
        enc = positional_encode(x, 3)
        assert enc.shape == (1, encoded_width(3, 3)) == (1, 21)
        assert torch.equal(enc[:, :3], x)
        assert float(enc[0, 3]) == pytest.approx(math.sin(math.pi * 0.25))
        assert float(enc[0, 6]) == pytest.approx(math.cos(math.pi * 0.25))

    def test_zero_frequencies(self):
        x = torch.randn(4, 2, dtype=DTYPE)
        assert torch.equal(positional_encode(x, 0), x)

    def test_negative_frequencies(self):
        with pytest.raises(ValidationError):
            positional_encode(torch.zeros(1, 3, dtype=DTYPE), -1)


class TestMlp:

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            MlpSpec(3, (0,), 1)
        with pytest.raises(ValidationError):
            MlpSpec(3, (8,), 1, activation='gelu')

    def test_shape_mismatch(self):
        mlp = Mlp(MlpSpec(3, (8,), 1))
        with pytest.raises(ShapeMismatchError):
            mlp(torch.zeros(5, 4, dtype=DTYPE))

    def test_final_bias(self):
        mlp = Mlp(MlpSpec(3, (8, 8), 2, freqs=2), final_scale=0.0, final_bias=0.7)
        out = mlp(torch.randn(10, 3, dtype=DTYPE))
        assert torch.allclose(out, torch.full((10, 2), 0.7, dtype=DTYPE))


class TestTape:

    def setup_method(self):
        torch.manual_seed(0)
        self.mlp = Mlp(MlpSpec(3, (16, 16), 2, 'softplus', 2))
        self.x = torch.randn(5, 3, dtype=DTYPE)
        self.upstream = torch.randn(5, 2, dtype=DTYPE)

    def loss(self, x=None):
        with torch.no_grad():
            return (self.mlp(self.x if x is None else x) * self.upstream).sum()

    def test_gradients_match_finite_differences(self):
        store = ParamStore.from_module(self.mlp)
        store.zero_grads()
        out, tape = mlp_forward(self.mlp, self.x)
        assert torch.allclose(out, self.mlp(self.x).detach())
        input_grad = mlp_backward(tape, self.upstream, store)

        for name, p in self.mlp.named_parameters():
            numeric = central_difference(self.loss, p.data)
            assert torch.allclose(p.grad, numeric, rtol=1e-4, atol=1e-7), name

        x = self.x.clone()
        numeric_x = central_difference(lambda: self.loss(x), x)
        assert torch.allclose(input_grad, numeric_x, rtol=1e-4, atol=1e-7)

    def test_backward_accumulates(self):
        store = ParamStore.from_module(self.mlp)
        store.zero_grads()
        _, tape = mlp_forward(self.mlp, self.x)
        mlp_backward(tape, self.upstream)
        once = {n: p.grad.clone() for n, p in self.mlp.named_parameters()}
        mlp_backward(tape, self.upstream)
        for n, p in self.mlp.named_parameters():
            assert torch.allclose(p.grad, 2 * once[n])

    def test_wrong_output_grad_shape(self):
        _, tape = mlp_forward(self.mlp, self.x)
        with pytest.raises(ShapeMismatchError):
            mlp_backward(tape, torch.zeros(5, 3, dtype=DTYPE))

    def test_foreign_store(self):
        other = ParamStore.from_module(Mlp(MlpSpec(3, (4,), 2)))
        _, tape = mlp_forward(self.mlp, self.x)
        with pytest.raises(TapeMismatchError):
            mlp_backward(tape, self.upstream, other)


class TestParamStore:

    def make(self, frozen=lambda name: False):
        module = nn.Module()
        module.a = nn.Parameter(torch.ones(3, dtype=DTYPE))
        module.b = nn.Parameter(torch.ones(2, dtype=DTYPE))
        store = ParamStore(module.named_parameters(), group_of=lambda n: 'fast' if n == 'a' else 'slow',
                           base_lrs={'fast': 0.1, 'slow': 0.01}, frozen=frozen)
        return module, store

    def test_first_adam_step_moves_by_lr(self):
        module, store = self.make()
        store.zero_grads()
        module.a.grad.copy_(torch.tensor([2.0, -3.0, 0.5], dtype=DTYPE))
        module.b.grad.copy_(torch.tensor([1.0, -1.0], dtype=DTYPE))
        adam_step(store)
        assert torch.allclose(module.a.data, torch.tensor([0.9, 1.1, 0.9], dtype=DTYPE), atol=1e-6)
        assert torch.allclose(module.b.data, torch.tensor([0.99, 1.01], dtype=DTYPE), atol=1e-6)
        assert store.step == 1

    def test_lr_override_per_group(self):
        module, store = self.make()
        store.zero_grads()
        module.a.grad.fill_(1.0)
        module.b.grad.fill_(1.0)
        adam_step(store, {'fast': 0.5})
        assert torch.allclose(module.a.data, torch.full((3,), 0.5, dtype=DTYPE), atol=1e-6)
        assert torch.allclose(module.b.data, torch.full((2,), 0.99, dtype=DTYPE), atol=1e-6)

    def test_frozen_tensors_stay_identical(self):
        module, store = self.make(frozen=lambda n: n == 'b')
        before = module.b.data.clone()
        assert not module.b.requires_grad
        assert set(store.trainable()) == {'a'}
        for _ in range(3):
            store.zero_grads()
            (module.a.sum() * 2).backward()
            adam_step(store)
        assert torch.equal(module.b.data, before)

    def test_mask_grads(self):
        module, store = self.make()
        store.zero_grads()
        module.a.grad.fill_(1.0)
        store.mask_grads('a')
        assert float(module.a.grad.abs().sum()) == 0.0

    def test_unknown_group(self):
        module = nn.Module()
        module.a = nn.Parameter(torch.ones(1, dtype=DTYPE))
        with pytest.raises(ValidationError):
            ParamStore(module.named_parameters(), group_of=lambda n: 'nope', base_lrs={'mlp': 1e-3})

    def test_state_round_trip(self):
        module, store = self.make()
        store.zero_grads()
        module.a.grad.fill_(1.0)
        adam_step(store)
        state = store.state_dict()
        _, fresh = self.make()
        fresh.load_state_dict(state)
        assert fresh.step == 1


class TestCosineSchedule:

    def test_endpoints(self):
        assert cosine_lr_scale(0, 100, 0.1) == pytest.approx(1.0)
        assert cosine_lr_scale(99, 100, 0.1) == pytest.approx(0.1)
        assert cosine_lr_scale(1000, 100, 0.1) == pytest.approx(0.1)

    def test_monotone(self):
        values = [cosine_lr_scale(i, 50, 0.1) for i in range(50)]
        assert all(a >= b for a, b in zip(values, values[1:]))
