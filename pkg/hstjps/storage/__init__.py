"""
Storage module initialization
"""
