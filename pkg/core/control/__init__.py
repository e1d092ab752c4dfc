"""
最优控制 - 非奇异性、极值曲线、打靶与距离估计
"""
