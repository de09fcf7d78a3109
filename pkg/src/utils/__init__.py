"""
Numeric tolerance, parsing and output helpers
"""
