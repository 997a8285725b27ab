from dataclasses import dataclass, replace

import numpy as np

ClipRange = tuple[float, float]
DEFAULT_CLIP: ClipRange = (-1.0, 1.0)


@dataclass(frozen=True, eq=False)
class AdamState:
    """Adam 的一阶/二阶矩、步数与超参数。"""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size: int, lr: float = 0.01, **kwargs) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size), lr=lr, **kwargs)


def adam_step(
    state: AdamState,
    params: np.ndarray,
    grad: np.ndarray,
    clip: ClipRange | None = None,
) -> tuple[np.ndarray, AdamState]:
    """带偏差修正的一步 Adam。

    启用 clip 时，先把梯度截断到区间内再更新，更新后的参数再截断一次。

    Returns:
        (新参数, 新状态)；输入数组不会被修改。
    """
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if params.shape != grad.shape or state.m.shape != params.shape:
        raise ValueError(
            f"形状不一致: params={params.shape}, grad={grad.shape}, moments={state.m.shape}"
        )
    if clip is not None:
        grad = np.clip(grad, clip[0], clip[1])

    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    updated = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if clip is not None:
        updated = np.clip(updated, clip[0], clip[1])
    return updated, replace(state, m=m, v=v, step=step)
