"""Masked LSTM recurrences shared by the similarity scorers.

Sequences are right-padded to a common length; a 0/1 mask freezes the
hidden and cell states on padded steps, so the state after the last step
equals the state after the last real token. Running the same recurrence
over the time-reversed inputs therefore yields the backward encoding of
the unpadded sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, concat, glorot, matmul, mul, sigmoid, tanh


@dataclass
class LSTMWeights:
    """Input, recurrent and bias weights with i|f|g|o gate packing."""

    wx: Tensor
    wh: Tensor
    b: Tensor

    @classmethod
    def create(cls, rng: np.random.Generator, input_dim: int,
               hidden_dim: int) -> "LSTMWeights":
        bias = np.zeros(4 * hidden_dim)
        bias[hidden_dim:2 * hidden_dim] = 1.0  # forget gate open at init
        return cls(
            wx=glorot(rng, input_dim, 4 * hidden_dim),
            wh=glorot(rng, hidden_dim, 4 * hidden_dim),
            b=Tensor(bias, requires_grad=True),
        )

    @property
    def hidden_dim(self) -> int:
        return self.wh.data.shape[0]

    def tensors(self) -> list[Tensor]:
        return [self.wx, self.wh, self.b]


def lstm_final_state(weights: LSTMWeights, steps: list[Tensor],
                     mask: np.ndarray) -> Tensor:
    """Run the recurrence over per-step inputs, returning the final hidden state.

    steps[t] has shape (batch, input_dim); mask has shape (batch, len(steps))
    with 1.0 on real tokens. Returns (batch, hidden_dim).
    """
    batch = steps[0].data.shape[0]
    hidden = weights.hidden_dim
    h = Tensor(np.zeros((batch, hidden)))
    c = Tensor(np.zeros((batch, hidden)))
    for t, x_t in enumerate(steps):
        gates = add(add(matmul(x_t, weights.wx), matmul(h, weights.wh)),
                    weights.b)
        i = sigmoid(gates[:, :hidden])
        f = sigmoid(gates[:, hidden:2 * hidden])
        g = tanh(gates[:, 2 * hidden:3 * hidden])
        o = sigmoid(gates[:, 3 * hidden:])
        c_next = add(mul(f, c), mul(i, g))
        h_next = mul(o, tanh(c_next))
        m = mask[:, t:t + 1]
        h = add(mul(h_next, m), mul(h, 1.0 - m))
        c = add(mul(c_next, m), mul(c, 1.0 - m))
    return h


def bilstm_encode(forward: LSTMWeights, backward: LSTMWeights,
                  steps: list[Tensor], mask: np.ndarray) -> Tensor:
    """Concatenated final forward and final backward hidden states.

    For right-padded input the reversed pass keeps its zero initial state
    through the padding, so it ends exactly at the first real token.
    """
    h_fwd = lstm_final_state(forward, steps, mask)
    h_bwd = lstm_final_state(backward, steps[::-1], mask[:, ::-1])
    return concat([h_fwd, h_bwd], axis=-1)
