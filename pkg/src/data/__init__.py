"""
Data layer - metric space models and JSON file storage
"""
