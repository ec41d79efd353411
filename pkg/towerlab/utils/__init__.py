"""
Utility modules for towerlab (constants, JSON support)
"""
