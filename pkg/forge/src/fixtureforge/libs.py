"""Source trees for the fixture libraries.

Each library is written to disk verbatim before fixtures are pickled, so the
corpus carries the exact sources a policy generator would analyze.  Keys are
paths relative to the corpus ``libs/`` directory.
"""

from __future__ import annotations

TOYLIB = {
    "toylib/__init__.py": '''\
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
''',
    "toylib/layers.py": '''\
class Dense:
    def __init__(self, units: int, activation: str = "relu"):
        self.units = units
        self.activation = activation
''',
    "toylib/train.py": '''\
import os


def checkpoint_path(run: str) -> str:
    return os.path.join("checkpoints", run)
''',
}

FLAIRLIKE = {
    "flairlike/__init__.py": '''\
"""Sequence tagger with a trainer-injected optimizer attribute."""

from flairlike.optim import SGDLike


class Tagger:
    def __init__(self, name: str, embedding_dim: int = 0):
        self.name = name
        self.embedding_dim = embedding_dim
        self.tag_map: dict[str, int] = {}
''',
    "flairlike/optim.py": '''\
class SGDLike:
    def __init__(self, lr: float = 0.01):
        self.lr = lr
''',
    "flairlike/trainer.py": '''\
from flairlike.optim import SGDLike


def prepare(tagger):
    # Stash the optimizer class on the instance; only ever set here.
    tagger.optimizer_class = SGDLike
    return tagger
''',
}

SUBCLAZOO = {
    "subclazoo/__init__.py": '''\
"""Estimator hierarchy exercising subclass and diamond resolution."""


class Estimator:
    def __init__(self, name: str):
        self.name = name


class ClassifierMixin(Estimator):
    def __init__(self, name: str):
        super().__init__(name)
        self.labels: list = []


class RegressorMixin(Estimator):
    def __init__(self, name: str):
        super().__init__(name)
        self.targets: set[int] = set()


class HybridHead(ClassifierMixin, RegressorMixin):
    def __init__(self, name: str, blend: float):
        super().__init__(name)
        self.blend = blend


class ZooClassifier(ClassifierMixin):
    def __init__(self, name: str):
        super().__init__(name)
        self.head = HybridHead("head", 0.5)


class ZooRegressor(RegressorMixin):
    def __init__(self, name: str):
        super().__init__(name)
        self.feature_ids = frozenset((4, 5))
        self.bins = {1, 2, 3}
''',
}

ORDEREDLIB = {
    "orderedlib/__init__.py": '''\
from collections import OrderedDict


class Config:
    def __init__(self, title: str):
        self.title = title
        self.entries: OrderedDict = OrderedDict()
''',
}

DRIFTLIB = {
    "driftlib/__init__.py": '''\
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
''',
}

NSMIX = {
    "nsmix/common.py": '''\
class Conv:
    def __init__(self, channels: int):
        self.channels = channels
''',
    "nsmix/netdef.py": '''\
from common import Conv


class Net:
    def __init__(self, name: str):
        self.name = name
        self.conv = Conv(3)
''',
}

LIBRARIES: dict[str, dict[str, str]] = {
    "toylib": TOYLIB,
    "flairlike": FLAIRLIKE,
    "subclazoo": SUBCLAZOO,
    "orderedlib": ORDEREDLIB,
    "driftlib": DRIFTLIB,
    "nsmix": NSMIX,
}

# Class each library's policy is generated from.
ROOTS: dict[str, str] = {
    "toylib": "toylib.Model",
    "flairlike": "flairlike.Tagger",
    "subclazoo": "subclazoo.Estimator",
    "orderedlib": "orderedlib.Config",
    "driftlib": "driftlib.Pipeline",
    "nsmix": "netdef.Net",
}
