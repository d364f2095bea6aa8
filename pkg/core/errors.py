"""
Motion Cluster Errors - Hierarchie d'exceptions
================================================

Toutes les erreurs levees par la librairie derivent de MotionClusterError.
Chaque classe porte le code de sortie que la CLI renvoie.

Author: Motion Cluster System
Date: 2025-11-24
"""

from typing import Optional


class MotionClusterError(Exception):
    """Erreur de base du systeme"""

    exit_code = 1


class ConfigError(MotionClusterError):
    """Cle ou valeur de configuration invalide"""

    exit_code = 2


class DataError(MotionClusterError):
    """Donnees manquantes ou mal formees"""

    exit_code = 3


class SequenceParseError(DataError):
    """
    Fichier de sequence mal forme

    Args:
        frame_index: Index de la frame fautive (None = manifest)
        field: Section ou champ en cause (POSE, POINTS, BOXES, ...)
        message: Detail lisible
    """

    def __init__(self, frame_index: Optional[int], field: str, message: str):
        self.frame_index = frame_index
        self.field = field
        where = "manifest" if frame_index is None else f"frame {frame_index}"
        super().__init__(f"{where}: field {field}: {message}")


class ModelFormatError(DataError):
    """Fichier modele tronque ou incoherent"""


class LabelFormatError(DataError):
    """Fichier de pseudo-labels mal forme"""


class ShapeError(MotionClusterError):
    """Dimensions de tenseurs incompatibles"""

    exit_code = 3


class NumericalError(MotionClusterError):
    """NaN / Inf detecte pendant le calcul"""

    exit_code = 4


def with_context(exc: MotionClusterError, context: str) -> MotionClusterError:
    """Meme classe (et meme code de sortie), message prefixe par le contexte"""
    err = exc.__class__.__new__(exc.__class__)
    err.__dict__.update(exc.__dict__)
    err.args = (f"{context}: {exc}",)
    return err
