"""
Experiment pipelines run by the CLI commands.
"""
