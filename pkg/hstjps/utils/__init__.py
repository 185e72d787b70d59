"""
Utils module initialization
"""
