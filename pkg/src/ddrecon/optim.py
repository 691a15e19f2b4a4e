"""Adam optimizer with bias correction."""

import numpy as np

from .errors import MissingGradientError


class Adam:
    """Standard Adam over a fixed list of parameter tensors.

    Moments are kept per parameter; ``step`` consumes the gradients
    currently stored on the tensors and increments the step counter.
    """

    def __init__(self, params, learning_rate=1e-4, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = list(params)
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise MissingGradientError(f"parameter {i} has no gradient; run backward first")
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            mhat = self.m[i] / bc1
            vhat = self.v[i] / bc2
            p.data = p.data - self.learning_rate * mhat / (np.sqrt(vhat) + self.epsilon)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def state_arrays(self, names):
        """Export moments and step count under checkpoint-friendly names."""
        out = {"adam.step": np.array([float(self.step_count)])}
        for name, m, v in zip(names, self.m, self.v):
            out[f"adam.m.{name}"] = m.copy()
            out[f"adam.v.{name}"] = v.copy()
        return out

    def load_state_arrays(self, arrays, names):
        self.step_count = int(arrays["adam.step"][0])
        self.m = [np.array(arrays[f"adam.m.{n}"], dtype=np.float64) for n in names]
        self.v = [np.array(arrays[f"adam.v.{n}"], dtype=np.float64) for n in names]
