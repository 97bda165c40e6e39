"""
Послойное батчирование запросов к DNN на GPU-сервере: оптимальные FIFO-расписания
(ДП по сегментам), варианты с дедлайнами и несколькими DNN, событийный симулятор
с клиентами, сетевыми трассами и выгрузкой части слоёв на сервер.
"""

__version__ = "0.1.0"
