"""Tiny model library with a custom tensor reduce hook."""

from toylib.layers import Dense


def read_weights_to_tensor(cls, path: str, shape: tuple):
    """Rebuild a tensor from a weight file reference."""
    tensor = cls.__new__(cls)
    tensor.path = path
    tensor.shape = shape
    return tensor


class Tensor:
    def __init__(self, path: str, shape: tuple):
        self.path = path
        self.shape = shape

    def __reduce__(self):
        return (read_weights_to_tensor, (Tensor, self.path, self.shape))


class Model:
    """Container tying named layers to their weight tensors."""

    def __init__(self, name: str):
        self.schema_version: int = 1
        self.name = name
        self.layers: list[Dense] = []
        self.weights: dict[str, Tensor] = {}

    def add_layer(self, layer: Dense) -> None:
        self.layers.append(layer)
