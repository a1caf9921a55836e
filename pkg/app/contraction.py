"""
テンソルネットワークの縮約
自己トレースを先に縮約し、残りは結果のランクが最小になる組から貪欲に縮約する
"""
import logging
from typing import Hashable, List, Sequence, Tuple

import numpy as np

from app.exact import ONE, object_array
from app.exceptions import SizeOverflowError

logger = logging.getLogger(__name__)

Label = Hashable
LabeledTensor = Tuple[np.ndarray, List[Label]]


def scalar_tensor(value=ONE) -> LabeledTensor:
    return object_array([value], ()), []


def trace_repeated(tensor: LabeledTensor) -> LabeledTensor:
    """同じラベルが2回現れる軸の組をトレースする"""
    data, labels = tensor
    labels = list(labels)
    while True:
        seen = {}
        pair = None
        for axis, label in enumerate(labels):
            if label in seen:
                pair = (seen[label], axis)
                break
            seen[label] = axis
        if pair is None:
            return data, labels
        i, j = pair
        data = np.asarray(np.trace(data, axis1=i, axis2=j), dtype=object)
        labels = [label for axis, label in enumerate(labels) if axis not in pair]


def result_rank(left: Sequence[Label], right: Sequence[Label]) -> int:
    shared = set(left) & set(right)
    return len(left) + len(right) - 2 * len(shared)


def contract_pair(left: LabeledTensor, right: LabeledTensor) -> LabeledTensor:
    """共有ラベルで縮約する（共有が無ければ外積）"""
    a, la = left
    b, lb = right
    shared = [label for label in la if label in lb]
    if not shared:
        data = np.multiply.outer(a, b)
    else:
        axes = ([la.index(label) for label in shared], [lb.index(label) for label in shared])
        data = np.tensordot(a, b, axes=axes)
    labels = [label for label in la if label not in shared] + [label for label in lb if label not in shared]
    return np.asarray(data, dtype=object), labels


def transpose_to(tensor: LabeledTensor, order: Sequence[Label]) -> np.ndarray:
    data, labels = tensor
    if sorted(map(repr, labels)) != sorted(map(repr, order)):
        raise ValueError(f"open labels {labels} do not match requested order {list(order)}")
    if not order:
        return data
    return np.transpose(data, [labels.index(label) for label in order])


def contract_network(
    tensors: Sequence[LabeledTensor],
    open_order: Sequence[Label],
    max_rank: int,
    strategy: str = "greedy",
) -> np.ndarray:
    """
    ネットワーク全体を縮約し、open_order の軸順で返す

    strategy:
      greedy     - 共有ラベルを持つ組のうち結果ランク最小を選ぶ（同点は位置順）
      sequential - リスト順に左から畳み込む
    """
    work = [trace_repeated(tensor) for tensor in tensors]
    for data, labels in work:
        if len(labels) > max_rank:
            raise SizeOverflowError(f"tensor of rank {len(labels)} exceeds the limit {max_rank}")
    if not work:
        work = [scalar_tensor()]

    while len(work) > 1:
        if strategy == "sequential":
            i, j = 0, 1
        elif strategy == "greedy":
            candidates = [
                (result_rank(work[i][1], work[j][1]), i, j)
                for i in range(len(work))
                for j in range(i + 1, len(work))
                if set(work[i][1]) & set(work[j][1])
            ]
            if not candidates:
                # 連結成分が分かれている: ランクの小さい2つの外積
                by_rank = sorted(range(len(work)), key=lambda k: (len(work[k][1]), k))
                i, j = sorted(by_rank[:2])
            else:
                _, i, j = min(candidates)
        else:
            raise ValueError(f"unknown contraction strategy: {strategy}")

        rank = result_rank(work[i][1], work[j][1])
        if rank > max_rank:
            raise SizeOverflowError(f"intermediate tensor of rank {rank} exceeds the limit {max_rank}")
        merged = trace_repeated(contract_pair(work[i], work[j]))
        work[i] = merged
        del work[j]

    return transpose_to(work[0], open_order)
