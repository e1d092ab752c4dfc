"""
收敛实验 - 字度量球与渐近锥球的差异
"""
