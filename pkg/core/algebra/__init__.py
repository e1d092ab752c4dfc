"""
代数核心 - 二步幂零李代数与群运算
"""
