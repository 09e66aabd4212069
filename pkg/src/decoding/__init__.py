"""
Beam / greedy / ensemble decoding and corpus-level decoding
"""

from src.decoding.beam_search import (
    BeamHypothesis,
    ModelEnsemble,
    beam_search,
    beam_search_hypotheses,
    greedy_decode,
)

__all__ = ['BeamHypothesis', 'ModelEnsemble', 'beam_search', 'beam_search_hypotheses', 'greedy_decode']
