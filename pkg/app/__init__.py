"""
Nilpotent Cone Lab Application Package
"""

__version__ = "0.3.0"
__author__ = "Chen Xinyu"
__email__ = "chenxy@fortune-data.com"
