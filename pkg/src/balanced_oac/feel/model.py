"""Small softmax classifier with a flat parameter vector.

``hidden=0`` gives multinomial logistic regression; otherwise one tanh
hidden layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Mlp:
    inputs: int
    hidden: int
    classes: int

    @property
    def shapes(self):
        if self.hidden == 0:
            return [(self.inputs, self.classes), (self.classes,)]
        return [(self.inputs, self.hidden), (self.hidden,),
                (self.hidden, self.classes), (self.classes,)]

    @property
    def num_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes)

    def unpack(self, w):
        out, pos = [], 0
        for s in self.shapes:
            n = int(np.prod(s))
            out.append(w[pos:pos + n].reshape(s))
            pos += n
        return out

    def init(self, rng) -> np.ndarray:
        parts = []
        for s in self.shapes:
            if len(s) == 2:
                parts.append(rng.normal(0.0, 1.0 / np.sqrt(s[0]), size=s).ravel())
            else:
                parts.append(np.zeros(s))
        return np.concatenate(parts)

    def logits(self, w, x):
        p = self.unpack(w)
        if self.hidden == 0:
            return x @ p[0] + p[1]
        a = np.tanh(x @ p[0] + p[1])
        return a @ p[2] + p[3]

    def loss(self, w, x, y) -> float:
        z = self.logits(w, x)
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        return float(-logp[np.arange(len(y)), y].mean())

    def loss_and_grad(self, w, x, y):
        """Mean cross-entropy over the batch and its gradient."""
        p = self.unpack(w)
        n = len(y)
        if self.hidden == 0:
            z = x @ p[0] + p[1]
        else:
            a = np.tanh(x @ p[0] + p[1])
            z = a @ p[2] + p[3]
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        total = e.sum(axis=1, keepdims=True)
        prob = e / total
        loss = float((np.log(total[:, 0]) - z[np.arange(n), y]).mean())
        dz = prob
        dz[np.arange(n), y] -= 1.0
        dz /= n
        if self.hidden == 0:
            grads = [x.T @ dz, dz.sum(axis=0)]
        else:
            da = (dz @ p[2].T) * (1.0 - a * a)
            grads = [x.T @ da, da.sum(axis=0), a.T @ dz, dz.sum(axis=0)]
        return loss, np.concatenate([g.ravel() for g in grads])

    def accuracy(self, w, x, y) -> float:
        return float(np.mean(self.logits(w, x).argmax(axis=1) == y))
