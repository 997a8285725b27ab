import os
from pathlib import Path

from .log import logger


class StorageError(OSError):
    """落盘失败；保留目标路径便于诊断。"""

    def __init__(self, message: str, path: Path) -> None:
        super().__init__(f"{message}: {path}")
        self.path = path


def atomic_write_text(path: str | Path, text: str) -> Path:
    """以 UTF-8 + LF 原子写入文本文件（先写 .tmp，再 replace）。

    Args:
        path: 目标文件路径，父目录不存在时会自动创建。
        text: 完整文件内容。

    Returns:
        写入后的目标路径。

    Raises:
        StorageError: 任何 I/O 失败，异常消息中带有目标路径。
    """
    target = Path(path)
    tmp_file = target.with_name(f"{target.name}.tmp")
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with tmp_file.open("w", encoding="utf-8", newline="\n") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        tmp_file.replace(target)
    except OSError as e:
        logger.error(f"[Storage] 保存文件失败: {e}")
        try:
            if tmp_file.exists():
                tmp_file.unlink()
        except OSError:
            pass
        raise StorageError(f"写入失败 ({e.strerror or e})", target) from e

    logger.debug(f"[Storage] 已写入 {target} ({len(text)} 字符)")
    return target


def read_text(path: str | Path) -> str:
    """读取 UTF-8 文本文件，失败时抛出带路径的 StorageError。"""
    source = Path(path)
    try:
        return source.read_text(encoding="utf-8")
    except OSError as e:
        raise StorageError(f"读取失败 ({e.strerror or e})", source) from e
