"""One-hidden-layer MLP with hand-written backprop and RMSprop.

Everything is float64 numpy; small enough that tight finite-difference
gradient checks hold. The network maps a flat state to K blocks of m
action values: q = W2 relu(W1 s + b1) + b2.

Checkpoint layout (little-endian, flat binary):
  8 bytes   magic b"CPQNET1\\n"
  3 int64   layer sizes: input, hidden, output
  3 float64 optimizer learning_rate, decay, epsilon
  float64 arrays, row-major, in order:
    W1 (hidden x input), b1 (hidden), W2 (output x hidden), b2 (output),
    then the four RMSprop accumulators in the same shapes.
"""

import numpy as np

CHECKPOINT_MAGIC = b"CPQNET1\n"


class CheckpointError(IOError):
    pass


class MLP:
    def __init__(self, w1, b1, w2, b2):
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)

    @classmethod
    def init(cls, layer_sizes, rng: np.random.Generator) -> "MLP":
        """He-normal weights (std sqrt(2/fan_in)), zero biases."""
        n_in, n_hidden, n_out = layer_sizes
        if min(n_in, n_hidden, n_out) < 1:
            raise ValueError(f"layer sizes must be positive, got {layer_sizes}")
        w1 = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_hidden, n_in))
        w2 = rng.normal(0.0, np.sqrt(2.0 / n_hidden), size=(n_out, n_hidden))
        return cls(w1, np.zeros(n_hidden), w2, np.zeros(n_out))

    @property
    def layer_sizes(self) -> tuple[int, int, int]:
        return (self.w1.shape[1], self.w1.shape[0], self.w2.shape[0])

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def forward(self, state: np.ndarray) -> np.ndarray:
        """Action values; accepts one state (in,) or a batch (n, in)."""
        x = np.asarray(state, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.w1.shape[1]:
            raise ValueError(f"state width {x.shape[1]} != input size {self.w1.shape[1]}")
        q = np.maximum(x @ self.w1.T + self.b1, 0.0) @ self.w2.T + self.b2
        return q[0] if single else q

    def clone(self) -> "MLP":
        return MLP(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


class RMSprop:
    """Per-parameter squared-gradient accumulator update.

    p -= lr * g / (sqrt(acc) + eps); a zero gradient leaves p unchanged.
    """

    def __init__(self, mlp: MLP, learning_rate: float = 0.00025,
                 decay: float = 0.95, epsilon: float = 1e-6):
        self.learning_rate = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self.acc = [np.zeros_like(p) for p in mlp.parameters()]

    def apply(self, mlp: MLP, grads) -> None:
        for p, a, g in zip(mlp.parameters(), self.acc, grads):
            a *= self.decay
            a += (1.0 - self.decay) * g * g
            p -= self.learning_rate * g / (np.sqrt(a) + self.epsilon)


def backprop(mlp: MLP, states: np.ndarray, grad_q: np.ndarray):
    """Parameter gradients for the loss whose dL/dq is grad_q, (n, out)."""
    x = np.asarray(states, dtype=np.float64)
    z1 = x @ mlp.w1.T + mlp.b1
    h = np.maximum(z1, 0.0)
    dw2 = grad_q.T @ h
    db2 = grad_q.sum(axis=0)
    dz1 = (grad_q @ mlp.w2) * (z1 > 0.0)
    dw1 = dz1.T @ x
    db1 = dz1.sum(axis=0)
    return [dw1, db1, dw2, db2]


def train_batch(mlp: MLP, opt: RMSprop, states, actions, targets,
                block_size: int) -> float:
    """One RMSprop step on the mean squared error of the selected outputs.

    actions (n, K) holds each cell's chosen index inside its own block of
    block_size outputs; targets (n, K) the per-cell Bellman targets. The
    gradient flows only through the K selected units of each sample.
    Returns the pre-update loss.
    """
    x = np.asarray(states, dtype=np.float64)
    acts = np.asarray(actions, dtype=int)
    y = np.asarray(targets, dtype=np.float64)
    n, num_cells = acts.shape

    q = mlp.forward(x)
    units = acts + np.arange(num_cells) * block_size     # (n, K) flat output units
    rows = np.repeat(np.arange(n), num_cells)
    cols = units.reshape(-1)
    diff = q[rows, cols].reshape(n, num_cells) - y
    loss = float(np.mean(diff ** 2))
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss: {loss}")

    grad_q = np.zeros_like(q)
    np.add.at(grad_q, (rows, cols), (2.0 * diff / diff.size).reshape(-1))
    opt.apply(mlp, backprop(mlp, x, grad_q))
    return loss


def save_checkpoint(path, mlp: MLP, opt: RMSprop) -> None:
    sizes = np.array(mlp.layer_sizes, dtype="<i8")
    hyper = np.array([opt.learning_rate, opt.decay, opt.epsilon], dtype="<f8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        sizes.tofile(f)
        hyper.tofile(f)
        for arr in mlp.parameters() + opt.acc:
            np.ascontiguousarray(arr, dtype="<f8").tofile(f)


def load_checkpoint(path) -> tuple[MLP, RMSprop]:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        sizes = np.fromfile(f, dtype="<i8", count=3)
        if sizes.size != 3 or np.any(sizes < 1):
            raise CheckpointError(f"{path}: corrupt size header {sizes}")
        n_in, n_hidden, n_out = (int(v) for v in sizes)
        lr, decay, eps = np.fromfile(f, dtype="<f8", count=3)
        shapes = [(n_hidden, n_in), (n_hidden,), (n_out, n_hidden), (n_out,)]
        arrays = []
        for shape in shapes + shapes:
            count = int(np.prod(shape))
            flat = np.fromfile(f, dtype="<f8", count=count)
            if flat.size != count:
                raise CheckpointError(
                    f"{path}: truncated at array of shape {shape} "
                    f"(sizes {n_in}/{n_hidden}/{n_out})")
            arrays.append(flat.reshape(shape))
        if f.read(1):
            raise CheckpointError(f"{path}: trailing bytes after expected payload")
    mlp = MLP(*arrays[:4])
    opt = RMSprop(mlp, learning_rate=float(lr), decay=float(decay), epsilon=float(eps))
    opt.acc = arrays[4:]
    return mlp, opt
