import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from safmn import tensor as tensor_mod
from safmn.tensor import Tensor, make_result


@pytest.fixture(autouse=True)
def _test_mode():
    """Every test starts and ends in 64-bit test mode."""
    tensor_mod.set_mode("test")
    yield
    tensor_mod.set_mode("test")


def vjp_scalar(fn, tensors, projection):
    """Backprop d(sum(fn(*tensors) * projection)) into the inputs."""
    for t in tensors:
        t.grad = None
    out = fn(*tensors)
    s = make_result(
        np.array((out.data * projection).sum()), (out,), lambda g: (g * projection,)
    )
    s.backward()


def check_grads_against_fd(fn, tensors, rng, rtol=1e-4, atol=1e-6, step=1e-6):
    """Compare analytic VJPs with central finite differences of the forward.

    The oracle never touches the backward path: it re-runs the forward pass
    at perturbed inputs only.
    """
    out = fn(*tensors)
    projection = rng.standard_normal(out.data.shape)
    vjp_scalar(fn, tensors, projection)

    def objective():
        return float((fn(*tensors).data * projection).sum())

    for t in tensors:
        if not t.requires_grad:
            continue
        assert t.grad is not None, "no gradient reached a differentiable input"
        assert t.grad.shape == t.data.shape
        flat = t.data.reshape(-1)
        grad_flat = t.grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            plus = objective()
            flat[i] = orig - step
            minus = objective()
            flat[i] = orig
            fd = (plus - minus) / (2.0 * step)
            err = abs(fd - grad_flat[i])
            bound = atol + rtol * max(abs(fd), abs(grad_flat[i]))
            assert err <= bound, (
                f"gradient mismatch at flat index {i}: analytic {grad_flat[i]!r}, "
                f"finite-difference {fd!r} (|diff| {err:.3e} > {bound:.3e})"
            )


def rand_tensor(rng, shape, scale=1.0, requires_grad=True):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=requires_grad)
