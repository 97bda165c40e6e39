"""
Эталонные (синтетические) профили для воспроизводимых прогонов без реального GPU.
Таблицы подобраны под агрегаты: GoogleNet 24 мс на один запрос и 28 мс на батч из 10;
сокращение времени на запрос при батче 10: VGG16 63%, ResNet50 81%, FCN 57%, GoogleNet 88%, SSD 67%.
Это данные, а не измерения.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from layerbatch.config import COMPRESS_S, DECOMPRESS_S, DEFAULT_GROUPS, DEFAULT_MAX_BATCH
from layerbatch.core.profile import ProfileSet, profile_from_dict

# Измеренная сетка размеров батча; между узлами — интерполяция
BATCH_GRID: Tuple[int, ...] = (1, 2, 4, 8, 10, 11, 12, 16, 17, 18, 20, 24, 32, 48, 64, 90)

# Относительные веса слоёв внутри компонента (по кругу)
_WEIGHT_PATTERN = (1.0, 1.6, 0.7, 1.3, 0.9, 1.5)


@dataclass(frozen=True)
class _Component:
    layers: int
    t1_ms: float          # сумма h_k(1) по слоям компонента
    slope: Optional[float]  # h(b) = h(1) * (1 + slope * (b - 1)); None — подобрать под DNN
    first_bits: float     # размер выхода первого слоя
    last_bits: float      # размер выхода последнего слоя
    bump: Optional[Tuple[int, float]] = None  # (b, +мс на последнем слое): немонотонность


_COMPONENTS: Dict[str, _Component] = {
    "vgg16_base": _Component(10, 7.0, 0.3, 2.4e6, 0.40e6),
    "vgg16_head": _Component(3, 3.0, None, 0.30e6, 0.01e6, bump=(18, 0.6)),
    "fcn_head": _Component(4, 8.0, None, 0.35e6, 0.20e6, bump=(11, 1.5)),
    "ssd_head": _Component(5, 13.0, None, 0.35e6, 0.05e6),
    "resnet50": _Component(12, 12.0, None, 3.2e6, 0.02e6),
    "googlenet": _Component(12, 24.0, None, 2.8e6, 0.01e6),
    "flownet2": _Component(8, 20.0, 0.15, 4.0e6, 0.9e6),
    "sdcnet_head": _Component(4, 10.0, 0.2, 0.8e6, 0.3e6),
    "rta_head": _Component(4, 8.0, 0.25, 0.8e6, 0.1e6),
}

# dnn_id -> (стадии, целевое время батча из 10 в мс или None)
_DNNS: Dict[str, Tuple[Tuple[str, ...], Optional[float]]] = {
    "vgg16": (("vgg16_base", "vgg16_head"), 10.0 * 10 * (1 - 0.63)),
    "fcn": (("vgg16_base", "fcn_head"), 15.0 * 10 * (1 - 0.57)),
    "ssd": (("vgg16_base", "ssd_head"), 20.0 * 10 * (1 - 0.67)),
    "resnet50": (("resnet50",), 12.0 * 10 * (1 - 0.81)),
    "googlenet": (("googlenet",), 28.0),
    "sdcnet": (("flownet2", "sdcnet_head"), None),
    "rta": (("flownet2", "rta_head"), None),
}

# Время полного локального исполнения на клиенте (Jetson Nano, 5W)
CLIENT_RUNTIME_MS: Dict[str, float] = {
    "vgg16": 230.0,
    "fcn": 240.0,
    "ssd": 270.0,
    "resnet50": 180.0,
    "googlenet": 150.0,
    "sdcnet": 320.0,
    "rta": 300.0,
}


def _solve_slopes() -> Dict[str, float]:
    """Наклон для компонентов без заданного slope: последняя стадия DNN добирает целевое T(10)."""
    slopes = {cid: c.slope for cid, c in _COMPONENTS.items() if c.slope is not None}
    for stages, t10 in _DNNS.values():
        if t10 is None:
            continue
        *fixed, free = stages
        if free in slopes:
            continue
        rest = sum(_COMPONENTS[c].t1_ms * (1 + 9 * slopes[c]) for c in fixed)
        head = _COMPONENTS[free].t1_ms
        slopes[free] = ((t10 - rest) / head - 1) / 9
    return slopes


def _weights(n: int) -> List[float]:
    raw = [_WEIGHT_PATTERN[i % len(_WEIGHT_PATTERN)] for i in range(n)]
    total = sum(raw)
    return [w / total for w in raw]


def reference_profile_dict(max_batch: int = DEFAULT_MAX_BATCH) -> dict:
    """Профиль в формате JSON-файла (мс)."""
    slopes = _solve_slopes()
    components = []
    grid = [b for b in BATCH_GRID if b <= max_batch]
    for cid, spec in _COMPONENTS.items():
        slope = slopes[cid]
        layers = []
        for k, w in enumerate(_weights(spec.layers), start=1):
            h1 = spec.t1_ms * w
            runtimes = {str(b): h1 * (1 + slope * (b - 1)) for b in grid}
            if spec.bump is not None and k == spec.layers and str(spec.bump[0]) in runtimes:
                runtimes[str(spec.bump[0])] += spec.bump[1]
            frac = (k - 1) / max(spec.layers - 1, 1)
            bits = spec.first_bits * (spec.last_bits / spec.first_bits) ** frac
            layers.append({"name": f"{cid}.{k}", "runtimes_ms": runtimes, "output_bits": bits})
        components.append({"component_id": cid, "layers": layers})
    dnns = [{"dnn_id": d, "stages": list(stages)} for d, (stages, _) in _DNNS.items()]
    return {"max_batch": max_batch, "components": components, "dnns": dnns}


def reference_profiles(max_batch: int = DEFAULT_MAX_BATCH, groups: int = DEFAULT_GROUPS) -> ProfileSet:
    return profile_from_dict(reference_profile_dict(max_batch)).with_groups(groups)


def reference_client_dict(profiles: ProfileSet) -> dict:
    """
    Клиентский профиль: полное время из CLIENT_RUNTIME_MS, по группам — пропорционально серверным
    группам при b=1; полезная нагрузка — выход последнего слоя группы.
    """
    dnns = {}
    for dnn_id, dnn in profiles.dnns.items():
        full_ms = CLIENT_RUNTIME_MS.get(dnn_id, 10.0 * dnn.runtime() * 1000.0)
        server = [dnn.runtime(first, last) for first, last in dnn.layer_groups]
        total = sum(server)
        dnns[dnn_id] = {
            "full_runtime_ms": full_ms,
            "group_runtimes_ms": [full_ms * s / total for s in server],
            "payload_bits": [dnn.output_size(last) for _, last in dnn.layer_groups],
        }
    return {
        "compress_ms": COMPRESS_S * 1000.0,
        "decompress_ms": DECOMPRESS_S * 1000.0,
        "dnns": dnns,
    }
