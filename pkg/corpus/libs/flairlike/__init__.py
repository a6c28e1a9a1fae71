"""Sequence tagger with a trainer-injected optimizer attribute."""

from flairlike.optim import SGDLike


class Tagger:
    def __init__(self, name: str, embedding_dim: int = 0):
        self.name = name
        self.embedding_dim = embedding_dim
        self.tag_map: dict[str, int] = {}
