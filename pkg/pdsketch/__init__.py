"""
Project package for the PDSketch toolkit (settings only; no web entry points).
"""
