"""
Исключения инструментария и коды завершения CLI
"""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_INFEASIBLE = 3


class LulcPpoError(Exception):
    """Базовое исключение инструментария"""

    exit_code = EXIT_RUNTIME


class ConfigError(LulcPpoError):
    """Некорректная конфигурация запуска или файл входных данных"""

    exit_code = EXIT_CONFIG


class EmptyGrid(LulcPpoError):
    """Сетка или гистограмма без пикселей"""


class ShapeMismatch(LulcPpoError):
    """Размерности массивов не совпадают с архитектурой сети"""


class EpisodeFinished(LulcPpoError):
    """Вызов step() после завершения эпизода"""


class NonFiniteLoss(LulcPpoError):
    """NaN или Inf в функции потерь или параметрах"""

    def __init__(self, message: str, diagnostics: dict = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self):
        if not self.diagnostics:
            return super().__str__()
        details = ", ".join(f"{key}={value}" for key, value in self.diagnostics.items())
        return f"{super().__str__()} ({details})"


class CheckpointError(LulcPpoError):
    """Чекпоинт отсутствует, поврежден или собран для другой архитектуры"""

    def __init__(self, message: str, field: str = None):
        super().__init__(message)
        self.field = field

    def __str__(self):
        if self.field is None:
            return super().__str__()
        return f"{super().__str__()} [поле: {self.field}]"


class InfeasibleScenario(LulcPpoError):
    """Сценарий делает количество пикселей класса отрицательным"""

    exit_code = EXIT_INFEASIBLE

    def __init__(self, message: str, lulc_class=None):
        super().__init__(message)
        self.lulc_class = lulc_class
