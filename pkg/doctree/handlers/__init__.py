"""Command handlers wired into the argparse tree by ``doctree.application``."""
