"""
水平几何 - 范数、水平子空间与路径
"""
