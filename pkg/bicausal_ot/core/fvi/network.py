"""可分离的代价函数近似器 F1(h)·σ(F2(x, y)) + F3(h)，h = T − t。

F1、F3 是 h 的二次多项式（各 3 个系数），F2 是 2d → 8 → 8 → 1 的 ReLU MLP。
所有参数放在一个扁平向量里，反向传播手写，便于 Adam 与截断统一处理。
"""

from dataclasses import dataclass, field

import numpy as np

HIDDEN_WIDTH = 8
HORIZON_FEATURES = 3


def smooth_l1(f: np.ndarray | float, v: np.ndarray | float, tau: float = 1.0) -> np.ndarray | float:
    """平滑 L1（Huber 型）损失：|r| < τ 时 r²/(2τ)，否则 |r| − τ/2。"""
    r = np.abs(np.asarray(f, dtype=float) - np.asarray(v, dtype=float))
    loss = np.where(r < tau, 0.5 * r * r / tau, r - 0.5 * tau)
    return float(loss) if loss.ndim == 0 else loss


def _smooth_l1_slope(residual: np.ndarray, tau: float) -> np.ndarray:
    return np.where(np.abs(residual) < tau, residual / tau, np.sign(residual))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _horizon_features(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    return np.stack([np.ones_like(h), h, h * h], axis=-1)


@dataclass(frozen=True)
class ParamLayout:
    """扁平参数向量中各块的切片。"""

    dimension: int
    slices: dict[str, slice] = field(init=False)
    shapes: dict[str, tuple[int, ...]] = field(init=False)
    size: int = field(init=False)

    def __post_init__(self) -> None:
        w = HIDDEN_WIDTH
        shapes = {
            "f1": (HORIZON_FEATURES,),
            "f3": (HORIZON_FEATURES,),
            "W0": (w, 2 * self.dimension),
            "b1": (w,),
            "W1": (w, w),
            "b2": (w,),
            "W2": (1, w),
            "b3": (1,),
        }
        slices, offset = {}, 0
        for name, shape in shapes.items():
            count = int(np.prod(shape))
            slices[name] = slice(offset, offset + count)
            offset += count
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "slices", slices)
        object.__setattr__(self, "size", offset)


class SeparableValueNet:
    """共享于所有时刻的代价函数网络。

    训练循环独占 `params` 并原地更新；读者应使用 `snapshot()` 拿到独立副本。
    """

    def __init__(self, dimension: int, params: np.ndarray | None = None) -> None:
        if int(dimension) < 1:
            raise ValueError(f"维数必须为正整数，实际为 {dimension}")
        self.layout = ParamLayout(int(dimension))
        if params is None:
            params = np.zeros(self.layout.size)
        params = np.array(params, dtype=float, copy=True).reshape(-1)
        if params.shape != (self.layout.size,):
            raise ValueError(f"参数长度应为 {self.layout.size}，实际为 {params.shape[0]}")
        self.params = params

    @classmethod
    def initialize(cls, dimension: int, rng: np.random.Generator) -> "SeparableValueNet":
        """权重取 U[-1/√fan_in, 1/√fan_in]，偏置与 F1、F3 系数取 0。"""
        net = cls(dimension)
        for name in ("W0", "W1", "W2"):
            shape = net.layout.shapes[name]
            bound = 1.0 / np.sqrt(shape[1])
            net.params[net.layout.slices[name]] = rng.uniform(-bound, bound, size=shape).reshape(-1)
        return net

    @property
    def dimension(self) -> int:
        return self.layout.dimension

    def block(self, name: str) -> np.ndarray:
        """某个参数块的视图（可写，形状为该块原始形状）。"""
        return self.params[self.layout.slices[name]].reshape(self.layout.shapes[name])

    def snapshot(self) -> "SeparableValueNet":
        return SeparableValueNet(self.dimension, self.params)

    def _prepare(self, h, x, y) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float).reshape(-1, self.dimension)
        y = np.asarray(y, dtype=float).reshape(-1, self.dimension)
        h = np.asarray(h, dtype=float).reshape(-1)
        count = max(x.shape[0], y.shape[0], h.shape[0])
        x = np.broadcast_to(x, (count, self.dimension))
        y = np.broadcast_to(y, (count, self.dimension))
        h = np.broadcast_to(h, (count,))
        return h, np.concatenate([x, y], axis=1)

    def _forward_cache(self, h, x, y) -> dict[str, np.ndarray]:
        h, inputs = self._prepare(h, x, y)
        phi = _horizon_features(h)
        a1 = inputs @ self.block("W0").T + self.block("b1")
        r1 = np.maximum(a1, 0.0)
        a2 = r1 @ self.block("W1").T + self.block("b2")
        r2 = np.maximum(a2, 0.0)
        logit = (r2 @ self.block("W2").T)[:, 0] + self.block("b3")[0]
        s = _sigmoid(logit)
        f1 = phi @ self.block("f1")
        f3 = phi @ self.block("f3")
        return {
            "phi": phi,
            "inputs": inputs,
            "a1": a1,
            "r1": r1,
            "a2": a2,
            "r2": r2,
            "s": s,
            "f1": f1,
            "out": f1 * s + f3,
        }

    def forward_batch(self, h, x, y) -> np.ndarray:
        """批量前向：h 形状 (n,) 或标量，x、y 形状 (n, d)，返回 (n,)。"""
        return self._forward_cache(h, x, y)["out"]

    def forward(self, h: int | float, x, y) -> float:
        """单点前向 F1(h)·σ(F2(x, y)) + F3(h)。"""
        return float(self.forward_batch(h, x, y)[0])

    def loss(self, h, x, y, targets: np.ndarray, tau: float = 1.0) -> float:
        """minibatch 上的平均平滑 L1 损失。"""
        out = self.forward_batch(h, x, y)
        return float(np.mean(smooth_l1(out, np.asarray(targets, dtype=float).reshape(-1), tau)))

    def grad_loss(self, h, x, y, targets: np.ndarray, tau: float = 1.0) -> tuple[float, np.ndarray]:
        """平均平滑 L1 损失及其对扁平参数的解析梯度。

        Returns:
            (loss, grad)，grad 与 `params` 同形。
        """
        cache = self._forward_cache(h, x, y)
        targets = np.asarray(targets, dtype=float).reshape(-1)
        count = cache["out"].shape[0]
        if count == 0:
            raise ValueError("minibatch 不能为空")
        residual = cache["out"] - targets
        loss = float(np.mean(smooth_l1(cache["out"], targets, tau)))

        d_out = _smooth_l1_slope(residual, tau) / count
        s, phi = cache["s"], cache["phi"]
        grads: dict[str, np.ndarray] = {
            "f1": phi.T @ (d_out * s),
            "f3": phi.T @ d_out,
        }
        d_logit = d_out * cache["f1"] * s * (1.0 - s)
        grads["W2"] = d_logit[None, :] @ cache["r2"]
        grads["b3"] = np.array([d_logit.sum()])
        d_a2 = (d_logit[:, None] * self.block("W2")) * (cache["a2"] > 0)
        grads["W1"] = d_a2.T @ cache["r1"]
        grads["b2"] = d_a2.sum(axis=0)
        d_a1 = (d_a2 @ self.block("W1")) * (cache["a1"] > 0)
        grads["W0"] = d_a1.T @ cache["inputs"]
        grads["b1"] = d_a1.sum(axis=0)

        grad = np.empty_like(self.params)
        for name, block_slice in self.layout.slices.items():
            grad[block_slice] = grads[name].reshape(-1)
        return loss, grad
