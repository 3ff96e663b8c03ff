"""Adam optimizer over named numpy parameters.

Parameters are updated in place, so the arrays handed to ``step`` must be
the arrays owned by the model.
"""

import numpy as np


class Adam:
    """Adaptive moment estimation with bias-corrected moments.

    Attributes:
        lr: The learning rate.
        beta1: Decay of the first moment estimate.
        beta2: Decay of the second moment estimate.
        eps: Offset added to the denominator.
        t: Number of steps taken.
    """

    def __init__(
        self,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        """Initializes the optimizer with empty moment estimates.

        Args:
            lr: The learning rate.
            beta1: Decay of the first moment estimate.
            beta2: Decay of the second moment estimate.
            eps: Offset added to the denominator.
        """
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(
        self,
        params: dict[str, np.ndarray],
        grads: dict[str, np.ndarray],
    ) -> None:
        """Applies one update to every parameter in place.

        Args:
            params: Parameter arrays keyed by name.
            grads: Gradients with the same keys and shapes.
        """
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, param in params.items():
            g = grads[name]
            if name not in self._m:
                self._m[name] = np.zeros_like(param)
                self._v[name] = np.zeros_like(param)
            m, v = self._m[name], self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            param -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
