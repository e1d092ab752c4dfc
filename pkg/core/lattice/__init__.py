"""
格与字度量
"""
