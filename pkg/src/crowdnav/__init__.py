"""
crowdnav Python Package

Online POMDP planning for vehicle navigation among pedestrian crowds
"""

__version__ = "0.4.0"
