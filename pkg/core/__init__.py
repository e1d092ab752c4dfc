"""
Core Computation Package
"""
