"""Pipeline library whose legacy head class is no longer referenced."""


class Step:
    def __init__(self, name: str, scale: float):
        self.name = name
        self.scale = scale


class Pipeline:
    def __init__(self, name: str):
        self.name = name
        self.steps: list[Step] = []


class LegacyHead:
    """Retired output head kept only for old checkpoints."""

    def __init__(self, bias: float = 0.0):
        self.bias = bias
