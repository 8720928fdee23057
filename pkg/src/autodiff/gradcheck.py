"""
Central finite-difference gradient checking
"""

from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .tensor import Tensor, no_grad

DEFAULT_STEP = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """||a - n|| / max(||a||, ||n||, floor)"""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / scale)


def numerical_gradient(objective: Callable[[], Tensor], array: np.ndarray,
                       indices: Optional[Iterable[Tuple[int, ...]]] = None,
                       h: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences of a scalar objective w.r.t. entries of `array` (perturbed in place)"""
    if indices is None:
        indices = list(np.ndindex(*array.shape))
    grads = []
    with no_grad():
        for index in indices:
            original = array[index]
            array[index] = original + h
            f_plus = objective().item()
            array[index] = original - h
            f_minus = objective().item()
            array[index] = original
            grads.append((f_plus - f_minus) / (2.0 * h))
    return np.array(grads)


def analytic_gradients(objective: Callable[[], Tensor], inputs: Sequence[Tensor]) -> List[np.ndarray]:
    for tensor in inputs:
        tensor.zero_grad()
    objective().backward()
    return [t.grad.copy() if t.grad is not None else np.zeros(t.shape) for t in inputs]


def check_gradients(objective: Callable[[], Tensor], inputs: Sequence[Tensor],
                    h: float = DEFAULT_STEP) -> Dict[int, float]:
    """Relative error between analytic and numeric gradients for every input"""
    analytic = analytic_gradients(objective, inputs)
    errors = {}
    for position, (tensor, grad) in enumerate(zip(inputs, analytic)):
        numeric = numerical_gradient(objective, tensor.data, h=h)
        errors[position] = relative_error(grad, numeric)
    return errors


def random_projection(shape: Tuple[int, ...], rng: np.random.Generator) -> Tensor:
    """Fixed random weights turning a tensor output into a scalar objective"""
    return Tensor(rng.standard_normal(shape))
