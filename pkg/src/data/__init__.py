"""
Triplet corpora: file I/O, encoded examples and synthetic generation
"""
