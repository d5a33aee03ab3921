"""
Command modules for the CLI; each exposes ``register(subparsers)``.
"""
