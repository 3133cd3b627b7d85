"""Small bundled inputs: the worked four-token beam-search example."""

from importlib.resources import files


def path(name: str) -> str:
    return str(files(__name__) / name)
