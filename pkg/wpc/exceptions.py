"""
Hiérarchie d'erreurs et codes de sortie
"""

from typing import Optional


class WPCError(Exception):
    """Erreur de base; `exit_code` joue le rôle du status_code HTTP"""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# === PARAMÈTRES (2) ===

class ParameterError(WPCError):
    """Paramètre invalide"""

    exit_code = 2


class ReferenceInvalidError(ParameterError):
    """Valeur de référence S_i non positive"""

    def __init__(self, level: str, value: float):
        super().__init__(f"Référence invalide au niveau {level}: S={value} (doit être > 0)")
        self.level = level
        self.value = value


class DegenerateInputError(ParameterError):
    """Toutes les valeurs relatives sont nulles"""


# === DONNÉES MANQUANTES (3) ===

class MissingDataError(WPCError):
    """Entrée absente du store ou métrique sans échantillon"""

    exit_code = 3

    def __init__(self, detail: str, key: Optional[tuple] = None):
        super().__init__(detail)
        self.key = key


class UndefinedMetricError(MissingDataError):
    """Métrique non définie (aucun échantillon) transmise à la fusion"""

    def __init__(self, level: str, metric: str):
        super().__init__(f"Métrique {metric} non définie au niveau {level}", key=(level, metric))
        self.level = level
        self.metric = metric


class UndefinedCorrelationError(MissingDataError):
    """Corrélation indéfinie (variance nulle)"""


# === E/S (4) ===

class WPCIOError(WPCError):
    """Erreur d'entrée/sortie"""

    exit_code = 4

    def __init__(self, detail: str, position: Optional[int] = None):
        super().__init__(detail)
        self.position = position


class TraceFormatError(WPCIOError):
    """Format de trace invalide (magic, version, type d'événement)"""


class TraceCorruptionError(TraceFormatError):
    """Enregistrement tronqué"""

    def __init__(self, event_index: int, position: Optional[int] = None):
        super().__init__(f"Trace corrompue: enregistrement {event_index} tronqué", position)
        self.event_index = event_index


class CounterSchemaError(WPCIOError):
    """Colonne manquante dans le CSV de compteurs"""

    def __init__(self, column: str):
        super().__init__(f"Colonne manquante dans le fichier de compteurs: {column}")
        self.column = column


class CounterParseError(WPCIOError):
    """Valeur non numérique ou invalide dans le CSV de compteurs"""

    def __init__(self, line: int, detail: str):
        super().__init__(f"Ligne {line}: {detail}")
        self.line = line
