"""Per-dimension tanh MLP policies with sign-constrained weights.

Each latent dimension ``i`` is driven by its own scalar network
``a_i = flip_i * scale_i * pi_i(s1_i, s2_i)`` where ``s1 = z`` and
``s2 = integral of z``.  With every weight of a network carrying a fixed sign,
the input Jacobian is a product of those weights and positive ``1 - tanh^2``
factors, so its sign is fixed by construction.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DimMismatch, UnstableOpenLoop

DEFAULT_FLOOR = 1e-6
DEFAULT_HIDDEN = (16, 16)


@dataclass(frozen=True)
class ConstrainedMLP:
    """Scalar-output tanh MLP.

    ``signs`` holds one array of +1/-1 per layer (same shape as the weight),
    or is ``None`` for an unconstrained network.  ``gain_cap`` optionally
    bounds :meth:`gain_bound` on constrained networks.
    """

    weights: tuple
    biases: tuple
    signs: tuple = None
    floor: float = DEFAULT_FLOOR
    final_tanh: bool = True
    gain_cap: Optional[float] = None

    def __post_init__(self):
        if self.gain_cap is not None and not self.gain_cap > 0:
            raise ValueError("gain_cap must be positive")
        ws = tuple(np.array(w, dtype=float) for w in self.weights)
        bs = tuple(np.array(b, dtype=float).reshape(-1) for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise DimMismatch("need one bias per weight matrix")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or w.shape[0] != b.size:
                raise DimMismatch(f"layer {k}: weight {w.shape} vs bias {b.shape}")
            if k and w.shape[1] != ws[k - 1].shape[0]:
                raise DimMismatch(f"layer {k} input {w.shape[1]} != previous output {ws[k - 1].shape[0]}")
        if ws[-1].shape[0] != 1:
            raise DimMismatch("networks must have a single output")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        if self.signs is not None:
            ss = tuple(np.sign(np.array(s, dtype=float)) for s in self.signs)
            if len(ss) != len(ws) or any(s.shape != w.shape for s, w in zip(ss, ws)):
                raise DimMismatch("sign pattern must match weight shapes")
            if any(np.any(s == 0) for s in ss):
                raise ValueError("sign pattern entries must be +1 or -1")
            object.__setattr__(self, "signs", ss)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @property
    def constrained(self) -> bool:
        return self.signs is not None

    def violations(self) -> int:
        """Number of weights off their required sign or below the floor."""
        if self.signs is None:
            return 0
        n = int(sum(np.count_nonzero((np.sign(w) != s) | (np.abs(w) < self.floor))
                    for w, s in zip(self.weights, self.signs)))
        if self.gain_cap is not None and self.gain_bound() > self.gain_cap * (1 + 1e-9):
            n += 1
        return n

    def gain_bound(self) -> float:
        """Product of layer infinity norms; bounds every input-gradient entry."""
        return float(np.prod([np.abs(w).sum(axis=1).max() for w in self.weights]))

    def _activate(self, k, pre):
        if k == len(self.weights) - 1 and not self.final_tanh:
            return pre
        return np.tanh(pre)

    def __call__(self, x) -> float:
        h = np.asarray(x, dtype=float)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = self._activate(k, w @ h + b)
        return float(h[0])

    def preactivations(self, x) -> list:
        h = np.asarray(x, dtype=float)
        out = []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            pre = w @ h + b
            out.append(pre)
            h = self._activate(k, pre)
        return out

    def input_gradient(self, x) -> np.ndarray:
        """Chain product ``W_l M_{l-1} ... M_1 W_1`` (times ``M_l`` for a tanh output)."""
        h = np.asarray(x, dtype=float)
        g = np.eye(h.size)
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            pre = w @ h + b
            g = w @ g
            if k == last and not self.final_tanh:
                h = pre
            else:
                h = np.tanh(pre)
                g = (1.0 - h * h)[:, None] * g
        return g[0]

    def structural_signs(self) -> np.ndarray:
        """Sign of the Jacobian in each input implied by the sign pattern.

        Requires a uniform sign per hidden/output layer and per input column
        of the first layer; unconstrained networks report +1.
        """
        if self.signs is None:
            return np.ones(self.n_inputs)
        first = self.signs[0]
        if np.any(first != first[0:1, :]):
            raise ValueError("first-layer signs must be uniform per input column")
        rest = 1.0
        for s in self.signs[1:]:
            if np.any(s != s.flat[0]):
                raise ValueError("hidden-layer signs must be uniform per layer")
            rest *= s.flat[0]
        return first[0] * rest

    def project(self) -> "ConstrainedMLP":
        """Snap every weight onto its sign, keeping magnitude, with the floor.

        With ``gain_cap`` set, all layers are then shrunk by a common factor
        until :meth:`gain_bound` is at most the cap.
        """
        if self.signs is None:
            return self
        mags = [np.maximum(np.abs(w), self.floor) for w in self.weights]
        if self.gain_cap is not None:
            bound = float(np.prod([m.sum(axis=1).max() for m in mags]))
            if bound > self.gain_cap:
                shrink = (self.gain_cap / bound) ** (1.0 / len(mags))
                mags = [np.maximum(m * shrink, self.floor) for m in mags]
        return replace(self, weights=tuple(s * m for m, s in zip(mags, self.signs)))

    def n_params(self) -> int:
        return int(sum(w.size + b.size for w, b in zip(self.weights, self.biases)))

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def with_flat(self, theta) -> "ConstrainedMLP":
        theta = np.asarray(theta, dtype=float)
        ws, bs, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(theta[k:k + w.size].reshape(w.shape))
            k += w.size
            bs.append(theta[k:k + b.size].copy())
            k += b.size
        if k != theta.size:
            raise DimMismatch(f"expected {k} parameters, got {theta.size}")
        return replace(self, weights=tuple(ws), biases=tuple(bs))

    def to_dict(self) -> dict:
        return {
            "shapes": [list(w.shape) for w in self.weights],
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "signs": None if self.signs is None else [s.ravel().astype(int).tolist() for s in self.signs],
            "floor": self.floor,
            "final_tanh": self.final_tanh,
            "gain_cap": self.gain_cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConstrainedMLP":
        shapes = [tuple(s) for s in d["shapes"]]
        ws = [np.array(w, dtype=float).reshape(s) for w, s in zip(d["weights"], shapes)]
        signs = d.get("signs")
        if signs is not None:
            signs = [np.array(s, dtype=float).reshape(sh) for s, sh in zip(signs, shapes)]
        return cls(weights=tuple(ws), biases=tuple(np.array(b, dtype=float) for b in d["biases"]),
                   signs=None if signs is None else tuple(signs),
                   floor=float(d.get("floor", DEFAULT_FLOOR)), final_tanh=bool(d.get("final_tanh", True)),
                   gain_cap=d.get("gain_cap"))


@dataclass(frozen=True)
class PolicyState:
    """Running integral ``s2`` of the auxiliary state ``z``."""

    s2: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, n: int) -> "PolicyState":
        return cls(np.zeros(n), 0.0)

    def advance(self, z, dt: float) -> "PolicyState":
        return PolicyState(self.s2 + np.asarray(z, dtype=float) * dt, self.t + dt)


@dataclass(frozen=True)
class PolicyBank:
    """One network per latent dimension plus output flips and scales.

    Network ``i`` sees ``(z_i, integral_gain_i * s2_i)``; its output is
    multiplied by ``flip_i * output_scale_i``.  Scales and gains are positive
    so they never change the sign of a Jacobian.
    """

    nets: tuple
    flips: np.ndarray = None
    integral_mask: np.ndarray = None
    output_scale: np.ndarray = None
    integral_gain: np.ndarray = None

    def __post_init__(self):
        n = len(self.nets)
        object.__setattr__(self, "nets", tuple(self.nets))
        flips = np.ones(n) if self.flips is None else np.asarray(self.flips, dtype=float).reshape(-1)
        mask = np.ones(n, dtype=bool) if self.integral_mask is None else np.asarray(self.integral_mask, dtype=bool).reshape(-1)
        scale = np.ones(n) if self.output_scale is None else np.asarray(self.output_scale, dtype=float).reshape(-1)
        ki = np.ones(n) if self.integral_gain is None else np.asarray(self.integral_gain, dtype=float).reshape(-1)
        if not flips.size == mask.size == scale.size == ki.size == n:
            raise DimMismatch("flips, integral_mask, output_scale and integral_gain need one entry per network")
        if np.any(ki <= 0):
            raise ValueError("integral_gain must be positive")
        if np.any((flips != 1) & (flips != -1)):
            raise ValueError("flips must be +1 or -1")
        if np.any(scale <= 0):
            raise ValueError("output_scale must be positive")
        for i, net in enumerate(self.nets):
            if net.n_inputs != 1 + int(mask[i]):
                raise DimMismatch(f"net {i} takes {net.n_inputs} inputs, integral_mask implies {1 + int(mask[i])}")
        object.__setattr__(self, "flips", flips)
        object.__setattr__(self, "integral_mask", mask)
        object.__setattr__(self, "output_scale", scale)
        object.__setattr__(self, "integral_gain", ki)

    @property
    def dim(self) -> int:
        return len(self.nets)

    @property
    def constrained(self) -> bool:
        return all(net.constrained for net in self.nets)

    def _inputs(self, i, z, s2):
        return (z[i], self.integral_gain[i] * s2[i]) if self.integral_mask[i] else (z[i],)

    def _check(self, z, ps):
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size != self.dim or np.asarray(ps.s2).size != self.dim:
            raise DimMismatch(f"bank has {self.dim} networks, got z of size {z.size}")
        return z

    def forward(self, z, ps: PolicyState) -> np.ndarray:
        z = self._check(z, ps)
        return np.array([self.flips[i] * self.output_scale[i] * net(self._inputs(i, z, ps.s2))
                         for i, net in enumerate(self.nets)])

    def jacobian_diag(self, z, ps: PolicyState):
        """Diagonals of ``d a / d s1`` and ``d a / d s2`` (flip and scale included)."""
        z = self._check(z, ps)
        d1 = np.zeros(self.dim)
        d2 = np.zeros(self.dim)
        for i, net in enumerate(self.nets):
            g = self.flips[i] * self.output_scale[i] * net.input_gradient(self._inputs(i, z, ps.s2))
            d1[i] = g[0]
            if self.integral_mask[i]:
                d2[i] = g[1] * self.integral_gain[i]
        return d1, d2

    def jacobian(self, z, ps: PolicyState):
        d1, d2 = self.jacobian_diag(z, ps)
        return np.diag(d1), np.diag(d2)

    def max_preactivation(self, z, ps: PolicyState) -> np.ndarray:
        z = self._check(z, ps)
        return np.array([max(float(np.max(np.abs(p))) for p in net.preactivations(self._inputs(i, z, ps.s2)))
                         for i, net in enumerate(self.nets)])

    def violations(self) -> int:
        return sum(net.violations() for net in self.nets)

    def n_params(self) -> int:
        return sum(net.n_params() for net in self.nets)

    def flat(self) -> np.ndarray:
        return np.concatenate([net.flat() for net in self.nets])

    def with_flat(self, theta) -> "PolicyBank":
        theta = np.asarray(theta, dtype=float)
        nets, k = [], 0
        for net in self.nets:
            m = net.n_params()
            nets.append(net.with_flat(theta[k:k + m]))
            k += m
        if k != theta.size:
            raise DimMismatch(f"expected {k} parameters, got {theta.size}")
        return replace(self, nets=tuple(nets))

    def to_dict(self) -> dict:
        return {
            "nets": [net.to_dict() for net in self.nets],
            "flips": self.flips.astype(int).tolist(),
            "integral_mask": self.integral_mask.tolist(),
            "output_scale": self.output_scale.tolist(),
            "integral_gain": self.integral_gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyBank":
        return cls(nets=tuple(ConstrainedMLP.from_dict(n) for n in d["nets"]),
                   flips=np.array(d["flips"], dtype=float),
                   integral_mask=np.array(d["integral_mask"], dtype=bool),
                   output_scale=np.array(d.get("output_scale", [1.0] * len(d["nets"])), dtype=float),
                   integral_gain=np.array(d.get("integral_gain", [1.0] * len(d["nets"])), dtype=float))


def forward(bank: PolicyBank, z, ps: PolicyState) -> np.ndarray:
    return bank.forward(z, ps)


def jacobian(bank: PolicyBank, z, ps: PolicyState):
    return bank.jacobian(z, ps)


def project(bank: PolicyBank) -> PolicyBank:
    """Every constrained network snapped onto its sign pattern; biases untouched."""
    return replace(bank, nets=tuple(net.project() for net in bank.nets))


def set_flips(bank: PolicyBank, R_diag, lambda_diag) -> PolicyBank:
    """Choose output signs so that ``d pi_i / d s_ji * R_ii < 0``.

    Only valid when every open-loop eigenvalue is negative.
    """
    R_diag = np.asarray(R_diag, dtype=float).reshape(-1)
    lambda_diag = np.asarray(lambda_diag, dtype=float).reshape(-1)
    if R_diag.size != bank.dim or lambda_diag.size != bank.dim:
        raise DimMismatch("R and Lambda diagonals must match the bank size")
    if np.any(lambda_diag >= 0):
        raise UnstableOpenLoop(f"open-loop eigenvalues {lambda_diag.tolist()} are not all negative")
    if np.any(R_diag == 0):
        raise ValueError("zero diagonal input gain leaves the sign condition unsatisfiable")
    flips = np.empty(bank.dim)
    for i, net in enumerate(bank.nets):
        s = net.structural_signs()
        if np.any(s != s[0]):
            raise ValueError(f"net {i} has inputs with opposite structural signs")
        flips[i] = -np.sign(R_diag[i]) * s[0]
    return replace(bank, flips=flips)


def init_mlp(rng: np.random.Generator, n_inputs: int, hidden=DEFAULT_HIDDEN, constrained: bool = True,
             weight_range=(0.5, 2.0), bias_scale: float = 0.05, floor: float = DEFAULT_FLOOR,
             final_tanh: bool = True, gain_cap: Optional[float] = None) -> ConstrainedMLP:
    """Random network; weight magnitudes are ``U(weight_range) / fan_in``.

    Constrained networks get an all-positive sign pattern; unconstrained ones
    draw each weight sign at random.
    """
    sizes = [n_inputs, *hidden, 1]
    ws, bs, ss = [], [], []
    lo, hi = weight_range
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        mag = rng.uniform(lo, hi, size=(fan_out, fan_in)) / fan_in
        if constrained:
            ws.append(mag)
            ss.append(np.ones((fan_out, fan_in)))
        else:
            ws.append(mag * rng.choice([-1.0, 1.0], size=(fan_out, fan_in)))
        bs.append(rng.uniform(-bias_scale, bias_scale, size=fan_out))
    return ConstrainedMLP(weights=tuple(ws), biases=tuple(bs), signs=tuple(ss) if constrained else None,
                          floor=floor, final_tanh=final_tanh, gain_cap=gain_cap if constrained else None)


def init_bank(rng: np.random.Generator, dim: int, hidden=DEFAULT_HIDDEN, constrained: bool = True,
              integral_mask=None, output_scale=None, integral_gain=None, gain_cap=None, **kwargs) -> PolicyBank:
    """Random bank; ``gain_cap`` is a scalar or one entry per network."""
    mask = np.ones(dim, dtype=bool) if integral_mask is None else np.asarray(integral_mask, dtype=bool)
    caps = gain_cap if gain_cap is None or np.ndim(gain_cap) else [gain_cap] * dim
    if caps is not None and len(caps) != dim:
        raise DimMismatch("gain_cap needs one entry per network")
    nets = tuple(init_mlp(rng, 1 + int(mask[i]), hidden, constrained,
                          gain_cap=None if caps is None else float(caps[i]), **kwargs) for i in range(dim))
    return PolicyBank(nets=nets, integral_mask=mask, output_scale=output_scale, integral_gain=integral_gain)
