"""
文件读写
"""
