import numpy as np

from frwkv.tensor import no_grad


def numeric_grad(fn, tensor, h=1e-5):
    """Central differences of scalar ``fn()`` w.r.t. every entry of ``tensor``."""
    out = np.zeros_like(tensor.data)
    with no_grad():
        for idx in np.ndindex(tensor.shape):
            orig = tensor.data[idx]
            tensor.data[idx] = orig + h
            up = float(fn().data)
            tensor.data[idx] = orig - h
            down = float(fn().data)
            tensor.data[idx] = orig
            out[idx] = (up - down) / (2 * h)
    return out


def rel_error(analytic, numeric):
    """Norm-wise relative error; two (near-)zero gradients compare equal."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    diff = np.linalg.norm(analytic - numeric)
    if scale < 1e-10:
        return diff
    return diff / scale


def check_all_grads(loss_fn, named_params, h=1e-5):
    """Backprop once, then finite-difference every parameter. Returns {name: rel error}."""
    from frwkv.tensor import ComputationTape

    for p in named_params.values():
        p.grad = None
    with ComputationTape() as tape:
        loss = loss_fn()
        tape.backward(loss)
    errors = {}
    for name, p in named_params.items():
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        errors[name] = rel_error(analytic, numeric_grad(loss_fn, p, h))
    return errors
