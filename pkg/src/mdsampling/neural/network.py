"""Four-layer 1-D CNN with a dense head, with hand-written backward pass.

Activations are kept in ``(batch, W, channels)`` layout internally; the public
input is ``(batch, 3, W)`` or a single ``(3, W)`` array.
"""
import numpy as np

IN_CHANNELS = 3
CHANNELS = (4, 8, 16, 32)
KERNEL = 5
PAD = KERNEL // 2
MASK_LOGIT = -1e9


class ShapeError(ValueError):
    pass


def _conv_forward(x, w, b):
    # x: (B, W, Cin); w: (Cout, Cin, K)
    B, W, C = x.shape
    xp = np.pad(x, ((0, 0), (PAD, PAD), (0, 0)))
    cols = np.lib.stride_tricks.sliding_window_view(xp, KERNEL, axis=1).reshape(B, W, C * KERNEL)
    out = cols @ w.reshape(w.shape[0], -1).T + b
    return out, cols


def _conv_backward(dout, cols, w):
    B, W, Cout = dout.shape
    Cin = w.shape[1]
    wm = w.reshape(Cout, -1)
    dw = (dout.reshape(-1, Cout).T @ cols.reshape(B * W, -1)).reshape(w.shape)
    db = dout.sum(axis=(0, 1))
    dcols = (dout @ wm).reshape(B, W, Cin, KERNEL)
    dxp = np.zeros((B, W + 2 * PAD, Cin), dtype=dout.dtype)
    for t in range(KERNEL):
        dxp[:, t:t + W, :] += dcols[..., t]
    return dxp[:, PAD:PAD + W, :], dw, db


class ConvNet:
    """Conv(3->4->8->16->32, k=5, same padding) with ReLU, then a dense head.

    ``kind`` is ``"policy"`` (head width ``W``) or ``"value"`` (head width 1).
    """

    def __init__(self, W, kind="policy", rng=None, head_scale=None, dtype=np.float64):
        if kind not in ("policy", "value"):
            raise ValueError(f"unknown network kind {kind!r}")
        self.W, self.kind = int(W), kind
        self.out_dim = self.W if kind == "policy" else 1
        self.dtype = dtype
        rng = np.random.default_rng(0) if rng is None else rng
        if head_scale is None:
            head_scale = 0.01 if kind == "policy" else 1.0

        self.params = {}
        cin = IN_CHANNELS
        for i, cout in enumerate(CHANNELS):
            bound = np.sqrt(1.0 / (cin * KERNEL))
            self.params[f"conv{i}.w"] = rng.uniform(-bound, bound, (cout, cin, KERNEL)).astype(dtype)
            self.params[f"conv{i}.b"] = rng.uniform(-bound, bound, cout).astype(dtype)
            cin = cout
        fan_in = CHANNELS[-1] * self.W
        bound = np.sqrt(1.0 / fan_in)
        self.params["head.w"] = (head_scale * rng.uniform(-bound, bound, (self.out_dim, fan_in))).astype(dtype)
        self.params["head.b"] = (head_scale * rng.uniform(-bound, bound, self.out_dim)).astype(dtype)

    def layer_shapes(self):
        return [(name, p.shape) for name, p in self.params.items()]

    @property
    def num_params(self):
        return sum(p.size for p in self.params.values())

    def zero_(self):
        for p in self.params.values():
            p[...] = 0.0
        return self

    def copy(self):
        other = ConvNet.__new__(ConvNet)
        other.__dict__.update(self.__dict__)
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 2
        if single:
            x = x[None]
        if x.ndim != 3 or x.shape[1:] != (IN_CHANNELS, self.W):
            raise ShapeError(f"expected input of shape (B, {IN_CHANNELS}, {self.W}), got {x.shape}")
        return x, single

    def forward(self, x):
        """Return ``(out, cache)``; ``out`` is ``(B, out_dim)``."""
        x, _ = self._check_input(x)
        a = np.ascontiguousarray(x.transpose(0, 2, 1))
        cache = []
        for i in range(len(CHANNELS)):
            z, cols = _conv_forward(a, self.params[f"conv{i}.w"], self.params[f"conv{i}.b"])
            a = np.maximum(z, 0.0)
            cache.append((cols, z > 0))
        flat = a.reshape(a.shape[0], -1)
        out = flat @ self.params["head.w"].T + self.params["head.b"]
        return out, (cache, flat)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, dout):
        """Gradients of ``sum(out * dout)`` with respect to every parameter."""
        layers, flat = cache
        dout = np.asarray(dout, dtype=self.dtype).reshape(flat.shape[0], self.out_dim)
        grads = {"head.w": dout.T @ flat, "head.b": dout.sum(axis=0)}
        da = (dout @ self.params["head.w"]).reshape(flat.shape[0], self.W, CHANNELS[-1])
        for i in reversed(range(len(CHANNELS))):
            cols, active = layers[i]
            dz = da * active
            da, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = _conv_backward(dz, cols, self.params[f"conv{i}.w"])
        return grads


def as_legal_mask(legal, W):
    """Accept a boolean mask or a collection of legal slot indices."""
    arr = np.asarray(legal)
    if arr.dtype == bool:
        return arr
    mask = np.zeros(W, dtype=bool)
    mask[arr.astype(int)] = True
    return mask


def masked_log_softmax(logits, legal):
    """Log-probabilities with illegal slots pushed to ``MASK_LOGIT`` before the softmax."""
    legal = np.asarray(legal, dtype=bool)
    if not np.all(legal.any(axis=-1)):
        raise ValueError("every row needs at least one legal action")
    z = np.where(legal, logits, MASK_LOGIT)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class PolicyOutput:
    __slots__ = ("probs", "log_probs", "logits")

    def __init__(self, probs, log_probs, logits):
        self.probs, self.log_probs, self.logits = probs, log_probs, logits


def policy_forward(net, x, legal):
    """Masked action distribution for one state (``x`` of shape ``(3, W)``) or a batch."""
    single = np.asarray(x).ndim == 2
    logits = net(x)
    legal = as_legal_mask(legal, net.W).reshape(logits.shape)
    logp = masked_log_softmax(logits, legal)
    probs = np.exp(logp)
    if single:
        return PolicyOutput(probs[0], logp[0], logits[0])
    return PolicyOutput(probs, logp, logits)


def value_forward(net, x):
    out = net(x)[:, 0]
    return float(out[0]) if np.asarray(x).ndim == 2 else out


def entropy(probs, log_probs):
    return -np.sum(np.where(probs > 0, probs * log_probs, 0.0), axis=-1)
