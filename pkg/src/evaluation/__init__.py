"""Metrics, edit-reduction reports, ablations and figures"""
