"""Исключения пакета."""
from __future__ import annotations

from typing import Optional


class LayerBatchError(Exception):
    """Базовое исключение."""


class ConfigError(LayerBatchError):
    """Неизвестный планировщик, неверные ключи или значения конфигурации."""


class ProfileError(LayerBatchError):
    """Ошибка чтения или валидации профиля (таблицы h_k(b))."""


class WorkloadError(LayerBatchError):
    """Неверное описание нагрузки или сетевой трассы."""


class InfeasibleScheduleError(LayerBatchError):
    """Ни одно разбиение не укладывается в ограничение B."""

    def __init__(self, message: str, layer: Optional[int] = None):
        super().__init__(message)
        self.layer = layer


class PermutationLimitError(LayerBatchError):
    """Слишком много DNN для полного перебора перестановок."""


class SimulationError(LayerBatchError):
    """Нарушение инварианта симулятора (профиль не совпадает с DNN, батч больше B)."""
