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
