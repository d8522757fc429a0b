# Auto-generated from git changelog, do not edit!
__version__ = '0.3.20261017'
