"""
hauslab - Hausdorff-metric computations on finite metric spaces
Main package initialization
"""
