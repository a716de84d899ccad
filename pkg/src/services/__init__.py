"""
Animatable Model Builder - Services Package
"""

from .evaluation_service import EvaluationService

__all__ = ['EvaluationService']
