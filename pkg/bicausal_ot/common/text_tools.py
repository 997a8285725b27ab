import re

TRUE_WORDS = frozenset({"1", "true", "yes", "y", "on", "enable", "enabled", "开启", "开", "是"})
FALSE_WORDS = frozenset({"0", "false", "no", "n", "off", "disable", "disabled", "关闭", "关", "否"})

_AROUND_EQUALS = re.compile(r"\s*=\s*")
_AROUND_SEPARATORS = re.compile(r"\s*([,;:])\s*")


class TextFormatError(ValueError):
    """配置文本本身无法切分为 key=value 时抛出。"""

    def __init__(self, message: str, line_no: int) -> None:
        super().__init__(f"第 {line_no} 行: {message}")
        self.line_no = line_no


def strip_comment(line: str) -> str:
    """去掉 `#` 之后的注释并裁剪空白。"""
    return line.split("#", 1)[0].strip()


def split_key_values(text: str) -> list[tuple[str, str, int]]:
    """把扁平配置文本切分为 (key, value, 行号) 列表。

    支持：
    - 每行一个 `key = value`
    - 一行多个 `key=value`，以空白分隔
    - 列表写法 `horizons = 1, 2, 3`（逗号、分号、冒号两侧的空白会被忽略）
    - `#` 注释与空行
    """
    pairs: list[tuple[str, str, int]] = []
    for line_no, raw_line in enumerate((text or "").splitlines(), start=1):
        line = strip_comment(raw_line)
        if not line:
            continue
        line = _AROUND_EQUALS.sub("=", line)
        line = _AROUND_SEPARATORS.sub(r"\1", line)
        for token in line.split():
            if "=" not in token:
                raise TextFormatError(f"无法识别的片段 {token!r}（应为 key=value）", line_no)
            key, value = token.split("=", 1)
            key = key.strip()
            if not key:
                raise TextFormatError(f"片段 {token!r} 缺少 key", line_no)
            pairs.append((key, value.strip(), line_no))
    return pairs


def parse_float_list(raw: str) -> list[float]:
    """解析逗号分隔的实数列表，例如 `1, 2.5, 3` → [1.0, 2.5, 3.0]。"""
    items = [item.strip() for item in str(raw).split(",")]
    if not items or any(not item for item in items):
        raise ValueError(f"无效的数值列表: {raw!r}")
    return [float(item) for item in items]


def parse_int_list(raw: str) -> list[int]:
    """解析逗号分隔的整数列表，允许 `a-b` 区间写法：`1-3,5` → [1, 2, 3, 5]。"""
    values: list[int] = []
    for item in str(raw).split(","):
        item = item.strip()
        if not item:
            raise ValueError(f"无效的整数列表: {raw!r}")
        if "-" in item.lstrip("-"):
            lo_text, hi_text = item.split("-", 1)
            lo, hi = int(lo_text), int(hi_text)
            if hi < lo:
                raise ValueError(f"区间上界小于下界: {item!r}")
            values.extend(range(lo, hi + 1))
        else:
            values.append(int(item))
    return values


def parse_matrix(raw: str) -> list[list[float]]:
    """解析 `;` 分隔行、`,` 分隔列的矩阵，例如 `1,0;0,2`。"""
    rows = [parse_float_list(row) for row in str(raw).split(";")]
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise ValueError(f"矩阵各行长度不一致: {raw!r}")
    return rows


def parse_schedule(raw: str) -> list[tuple[int, float]]:
    """解析按期数分段的取值表，例如 `1:50,6:40,7:30,8:20`。

    每一项 `T:value` 表示从期数 T 起使用 value，直到下一项的 T。
    返回按 T 升序排列的 (T, value) 列表。
    """
    entries: list[tuple[int, float]] = []
    for item in str(raw).split(","):
        item = item.strip()
        if ":" not in item:
            raise ValueError(f"分段项缺少 ':'：{item!r}")
        start_text, value_text = item.split(":", 1)
        entries.append((int(start_text), float(value_text)))
    entries.sort(key=lambda entry: entry[0])
    starts = [start for start, _ in entries]
    if len(set(starts)) != len(starts):
        raise ValueError(f"分段起点重复: {raw!r}")
    return entries


def lookup_schedule(schedule: list[tuple[int, float]], horizon: int) -> float | None:
    """在分段表中查找 horizon 对应的取值；horizon 早于首个分段时返回 None。"""
    current = None
    for start, value in schedule:
        if horizon >= start:
            current = value
        else:
            break
    return current


def to_bool(value: object, default: bool = False) -> bool:
    """宽松地把配置值转换为布尔值，无法识别时抛出 ValueError。"""
    if isinstance(value, bool):
        return value
    if value is None:
        return default
    if isinstance(value, (int, float)):
        return bool(value)
    text = str(value).strip().lower()
    if text in TRUE_WORDS:
        return True
    if text in FALSE_WORDS:
        return False
    raise ValueError(f"无法识别的布尔值: {value!r}")


def format_params(params: dict[str, object]) -> str:
    """把参数字典压缩为 CSV `params` 列使用的 `k=v;k=v` 文本（按 key 排序）。"""
    parts = []
    for key in sorted(params):
        value = params[key]
        if isinstance(value, float):
            value = f"{value:.6g}"
        parts.append(f"{key}={value}")
    return ";".join(parts)
