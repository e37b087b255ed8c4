"""Desk-scale domain-adversarial training as a three-player game.

Networks (all full-batch by default):

* feature extractor ``g``: ``in -> hidden -> features``, tanh on both layers;
* label classifier ``h``: ``features -> classes`` (linear, softmax cross-entropy);
* domain classifier ``h'``: ``features -> hidden -> 1`` logit, tanh hidden layer.

Players and blocks: ``w1 = h``, ``w2 = g``, ``w3 = h'``, with
``J1 = l + alpha*d``, ``J2 = l + alpha*lam*d``, ``J3 = -alpha*d`` where ``l``
is the source cross-entropy and
``d = mean_s log sigmoid(z) + mean_t log(1 - sigmoid(z))`` on the domain logit.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteValue
from .game import DALSplit, Game, contiguous_partition


@dataclass(frozen=True)
class Architecture:
    input_dim: int = 2
    hidden_dim: int = 16
    feature_dim: int = 8
    n_classes: int = 2
    domain_hidden: int = 8

    def shapes(self):
        """Ordered ``(player, name, shape)`` for every parameter tensor."""
        i, hd, f, c, dh = (self.input_dim, self.hidden_dim, self.feature_dim,
                           self.n_classes, self.domain_hidden)
        return [
            (0, "Wc", (f, c)), (0, "bc", (c,)),
            (1, "W1", (i, hd)), (1, "b1", (hd,)), (1, "W2", (hd, f)), (1, "b2", (f,)),
            (2, "V1", (f, dh)), (2, "c1", (dh,)), (2, "V2", (dh, 1)), (2, "c2", (1,)),
        ]

    def block_sizes(self):
        sizes = [0, 0, 0]
        for player, _, shape in self.shapes():
            sizes[player] += int(np.prod(shape))
        return sizes

    @property
    def n_params(self):
        return sum(self.block_sizes())


def unpack(arch, w):
    """Views of the flat vector as named weight arrays."""
    out, offset = {}, 0
    for _, name, shape in arch.shapes():
        n = int(np.prod(shape))
        out[name] = w[offset:offset + n].reshape(shape)
        offset += n
    return out


def pack(arch, grads):
    return np.concatenate([np.asarray(grads[name]).reshape(-1) for _, name, _ in arch.shapes()])


def init_params(arch, seed, gain=1.0, head_gain=0.0):
    """Glorot-uniform weights scaled by ``gain``; zero biases.

    The label classifier ``Wc`` uses ``head_gain`` instead.  Its default of
    zero makes the initial prediction constant, so early target accuracy is
    chance level rather than whatever a random hyperplane happens to score.
    """
    rng = np.random.default_rng(seed)
    parts = {}
    for _, name, shape in arch.shapes():
        if len(shape) == 2:
            g = head_gain if name == "Wc" else gain
            limit = g * np.sqrt(6.0 / (shape[0] + shape[1]))
            parts[name] = rng.uniform(-limit, limit, size=shape)
        else:
            parts[name] = np.zeros(shape)
    return pack(arch, parts)


@dataclass(frozen=True)
class TaskParams:
    n_per_domain: int = 200
    n_eval: int = 500
    means: tuple = ((-1.0, 0.0), (1.0, 0.0))
    std: float = 0.45
    shift: tuple = (1.0, 0.0)
    rotation_deg: float = 60.0
    seed: int = 0


@dataclass(frozen=True)
class TransferTask:
    xs: np.ndarray
    ys: np.ndarray
    xt: np.ndarray
    yt: np.ndarray = field(repr=False)
    xt_eval: np.ndarray = field(repr=False)
    yt_eval: np.ndarray = field(repr=False)
    params: TaskParams = None


def _clusters(rng, n, means, std):
    y = (np.arange(n) >= (n + 1) // 2).astype(np.int64)
    centers = np.asarray(means, dtype=np.float64)[y]
    return centers + std * rng.standard_normal((n, centers.shape[1])), y


def _to_target(x, params):
    theta = np.deg2rad(params.rotation_deg)
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    return x @ R.T + np.asarray(params.shift, dtype=np.float64)


def make_task(params=None, **overrides):
    """Two labelled Gaussian clusters; the target domain is the same mixture rotated then shifted.

    Source and target are independent draws.  Target labels are kept for
    evaluation only; ``xt_eval``/``yt_eval`` is a held-out target sample.
    """
    params = params or TaskParams()
    if overrides:
        params = TaskParams(**{**params.__dict__, **overrides})
    if params.n_per_domain < 10:
        raise ValueError("need at least 10 samples per domain")
    rng_s, rng_t, rng_e = np.random.default_rng(params.seed).spawn(3)
    xs, ys = _clusters(rng_s, params.n_per_domain, params.means, params.std)
    xt, yt = _clusters(rng_t, params.n_per_domain, params.means, params.std)
    xe, ye = _clusters(rng_e, params.n_eval, params.means, params.std)
    return TransferTask(xs, ys, _to_target(xt, params), yt, _to_target(xe, params), ye, params)


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def forward(arch, w, x):
    """``(class_logits, domain_logit, features)`` for a batch ``x``."""
    p = unpack(arch, w)
    a1 = np.tanh(x @ p["W1"] + p["b1"])
    f = np.tanh(a1 @ p["W2"] + p["b2"])
    logits = f @ p["Wc"] + p["bc"]
    hd = np.tanh(f @ p["V1"] + p["c1"])
    z = (hd @ p["V2"]).reshape(-1) + p["c2"][0]
    return logits, z, f


def _cross_entropy(logits, y):
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(logz - shifted[np.arange(y.size), y]))


def _divergence(zs, zt):
    # log sigmoid(z) = -softplus(-z); log(1 - sigmoid(z)) = -softplus(z)
    return float(-np.mean(_softplus(-zs)) - np.mean(_softplus(zt)))


def loss_and_divergence(arch, w, xs, ys, xt):
    logits_s, zs, _ = forward(arch, w, xs)
    _, zt, _ = forward(arch, w, xt)
    return _cross_entropy(logits_s, ys), _divergence(zs, zt)


def loss_divergence_grads(arch, w, xs, ys, xt):
    """Values and full gradients of ``l`` and ``d`` by manual backprop.

    Returns ``(l, d, grad_l, grad_d)``; gradients cover the whole joint
    vector (``grad_d`` is zero on the classifier block).
    """
    p = unpack(arch, w)
    ns, nt = xs.shape[0], xt.shape[0]
    x = np.vstack([xs, xt])
    pre1 = x @ p["W1"] + p["b1"]
    a1 = np.tanh(pre1)
    f = np.tanh(a1 @ p["W2"] + p["b2"])
    fs = f[:ns]

    logits = fs @ p["Wc"] + p["bc"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    sumexp = expz.sum(axis=1)
    loss = float(np.mean(np.log(sumexp) - shifted[np.arange(ns), ys]))
    dlogits = expz / sumexp[:, None]
    dlogits[np.arange(ns), ys] -= 1.0
    dlogits /= ns

    hd = np.tanh(f @ p["V1"] + p["c1"])
    z = (hd @ p["V2"]).reshape(-1) + p["c2"][0]
    zs, zt = z[:ns], z[ns:]
    div = float(-np.mean(_softplus(-zs)) - np.mean(_softplus(zt)))
    dz = np.concatenate([_sigmoid(-zs) / ns, -_sigmoid(zt) / nt])

    gl, gd = {}, {}
    # classifier head (loss only)
    gl["Wc"] = fs.T @ dlogits
    gl["bc"] = dlogits.sum(axis=0)
    gd["Wc"] = np.zeros_like(p["Wc"])
    gd["bc"] = np.zeros_like(p["bc"])
    df_l = np.zeros_like(f)
    df_l[:ns] = dlogits @ p["Wc"].T

    # domain head (divergence only)
    gd["V2"] = hd.T @ dz[:, None]
    gd["c2"] = np.array([dz.sum()])
    dpre_h = (dz[:, None] @ p["V2"].T) * (1.0 - hd * hd)
    gd["V1"] = f.T @ dpre_h
    gd["c1"] = dpre_h.sum(axis=0)
    df_d = dpre_h @ p["V1"].T
    for name in ("V1", "c1", "V2", "c2"):
        gl[name] = np.zeros_like(p[name])

    # both signals through the extractor
    for df, g in ((df_l, gl), (df_d, gd)):
        dpre2 = df * (1.0 - f * f)
        g["W2"] = a1.T @ dpre2
        g["b2"] = dpre2.sum(axis=0)
        dpre1 = (dpre2 @ p["W2"].T) * (1.0 - a1 * a1)
        g["W1"] = x.T @ dpre1
        g["b1"] = dpre1.sum(axis=0)

    return loss, div, pack(arch, gl), pack(arch, gd)


class DALGame(Game):
    """The DANN model on a transfer task, exposed as a three-player game."""

    def __init__(self, task, arch=None, lam=1.0, alpha=1.0, name="dal-toy"):
        self.arch = arch or Architecture()
        self.task = task
        self.lam = float(lam)
        self.alpha = float(alpha)
        partition = contiguous_partition(self.arch.block_sizes())
        costs = [lambda w, i=i: self.costs_at(w)[i] for i in range(3)]
        split = DALSplit(self._loss_grad, self._div_grad, lam=self.lam, alpha=self.alpha)
        super().__init__(costs, partition, split=split, name=name)

    @property
    def gradient_mode(self):
        return "analytic"

    def _grads(self, w, xs=None, ys=None, xt=None):
        t = self.task
        return loss_divergence_grads(self.arch, w,
                                     t.xs if xs is None else xs,
                                     t.ys if ys is None else ys,
                                     t.xt if xt is None else xt)

    def _loss_grad(self, w):
        return self._grads(w)[2]

    def _div_grad(self, w):
        return self._grads(w)[3]

    def costs_from(self, loss, div):
        a, lam = self.alpha, self.lam
        return np.array([loss + a * div, loss + a * lam * div, -a * div])

    def costs_at(self, w):
        t = self.task
        loss, div = loss_and_divergence(self.arch, w, t.xs, t.ys, t.xt)
        return self.costs_from(loss, div)

    def assemble_field(self, gl, gd):
        (o1, n1), (o2, n2), (o3, n3) = self.partition
        a, lam = self.alpha, self.lam
        v = np.empty_like(gl)
        v[o1:o1 + n1] = gl[o1:o1 + n1] + a * gd[o1:o1 + n1]
        v[o2:o2 + n2] = gl[o2:o2 + n2] + a * lam * gd[o2:o2 + n2]
        v[o3:o3 + n3] = -a * gd[o3:o3 + n3]
        return v

    def field_at(self, w):
        _, _, gl, gd = self._grads(w)
        return self.assemble_field(gl, gd)

    def batch_field(self, rng, batch_size):
        """Field on one mini-batch (``batch_size`` source and target samples, no replacement)."""
        t = self.task
        i_s = rng.choice(t.xs.shape[0], size=min(batch_size, t.xs.shape[0]), replace=False)
        i_t = rng.choice(t.xt.shape[0], size=min(batch_size, t.xt.shape[0]), replace=False)
        xs, ys, xt = t.xs[i_s], t.ys[i_s], t.xt[i_t]

        def v(w):
            _, _, gl, gd = self._grads(w, xs, ys, xt)
            return self.assemble_field(gl, gd)
        return v

    def init(self, seed, gain=1.0, head_gain=0.0):
        return init_params(self.arch, seed, gain, head_gain)

    def metrics(self, w):
        return {"source_acc": accuracy(self.arch, w, self.task.xs, self.task.ys),
                "target_acc": transfer_accuracy(self.arch, w, self.task)}


def accuracy(arch, w, x, y):
    logits, _, _ = forward(arch, w, x)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteValue("non-finite class logits")
    return float(np.mean(np.argmax(logits, axis=1) == y))


def transfer_accuracy(arch, w, task):
    """Accuracy of ``argmax h(g(x))`` on the held-out target sample."""
    return accuracy(arch, w, task.xt_eval, task.yt_eval)


def dal_costs(game, w):
    return game.costs_at(np.asarray(w, dtype=np.float64))


def dal_pseudo_gradient(game, w):
    return game.field_at(np.asarray(w, dtype=np.float64))


# ---------------------------------------------------------------------------
# Single-objective route: explicit layers with a gradient-reversal node.


class _Linear:
    def __init__(self, W, b):
        self.W, self.b = W, b

    def forward(self, x):
        self.x = x
        return x @ self.W + self.b

    def backward(self, g):
        self.dW = self.x.T @ g
        self.db = g.sum(axis=0)
        return g @ self.W.T


class _Tanh:
    def forward(self, x):
        self.y = np.tanh(x)
        return self.y

    def backward(self, g):
        return g * (1.0 - self.y ** 2)


class GradReverse:
    """Identity forward; multiplies the incoming gradient by ``-lam`` backward."""

    def __init__(self, lam):
        self.lam = lam

    def forward(self, x):
        return x

    def backward(self, g):
        return -self.lam * g


def _run(layers, x):
    for layer in layers:
        x = layer.forward(x)
    return x


def _back(layers, g):
    for layer in reversed(layers):
        g = layer.backward(g)
    return g


def grl_objective_gradient(arch, w, task, lam=1.0, alpha=1.0):
    """Gradient of ``l - alpha * d(h', R_lam(g))`` with GRL backward semantics."""
    p = unpack(arch, w)
    ns = task.xs.shape[0]
    nt = task.xt.shape[0]
    extractor = [_Linear(p["W1"], p["b1"]), _Tanh(), _Linear(p["W2"], p["b2"]), _Tanh()]
    classifier = [_Linear(p["Wc"], p["bc"])]
    domain = [GradReverse(lam), _Linear(p["V1"], p["c1"]), _Tanh(), _Linear(p["V2"], p["c2"])]

    feats = _run(extractor, np.vstack([task.xs, task.xt]))
    logits = _run(classifier, feats[:ns])
    z = _run(domain, feats)[:, 0]

    prob = np.exp(logits - logits.max(axis=1, keepdims=True))
    prob /= prob.sum(axis=1, keepdims=True)
    onehot = np.eye(arch.n_classes)[task.ys]
    g_logits = (prob - onehot) / ns
    # objective term -alpha*d; dd/dz = sigmoid(-z)/ns on source, -sigmoid(z)/nt on target
    zs, zt = z[:ns], z[ns:]
    g_z = -alpha * np.concatenate([(1.0 / (1.0 + np.exp(zs))) / ns,
                                   -(1.0 / (1.0 + np.exp(-zt))) / nt])

    g_feat = _back(domain, g_z[:, None])
    g_feat[:ns] += _back(classifier, g_logits)
    _back(extractor, g_feat)

    grads = {
        "Wc": classifier[0].dW, "bc": classifier[0].db,
        "W1": extractor[0].dW, "b1": extractor[0].db,
        "W2": extractor[2].dW, "b2": extractor[2].db,
        "V1": domain[1].dW, "c1": domain[1].db,
        "V2": domain[3].dW, "c2": domain[3].db,
    }
    return pack(arch, grads)
