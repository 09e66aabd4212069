"""
Training loop: batching, learning-rate schedule, optimizer, checkpoints
"""
