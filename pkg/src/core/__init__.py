"""
Configuration, error hierarchy and property-suite orchestration
"""
