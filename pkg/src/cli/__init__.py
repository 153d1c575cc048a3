"""
Command-line surface: argparse parser and pydantic experiment schemas.
"""
