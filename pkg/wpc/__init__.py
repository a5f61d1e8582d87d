"""
WPC - caractérisation de charge « whole-picture » pilotée par traces
"""

__version__ = "1.0.0"
