"""
GridGenius CLI Module

Command-line front end for the pipeline stages.
"""

from .main_cli import main

__all__ = ['main']
