"""
Joint BPE tokenizer shared by src, mt and pe
"""

from src.tokenizer.bpe import MergeTable, learn_bpe, encode, decode, split_pieces, words_from_ids

__all__ = ['MergeTable', 'learn_bpe', 'encode', 'decode', 'split_pieces', 'words_from_ids']
