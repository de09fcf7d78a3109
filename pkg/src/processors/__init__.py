"""
Processing modules - set functionals, lifts, nested sequences and example galleries
"""
