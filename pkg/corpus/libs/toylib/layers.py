class Dense:
    def __init__(self, units: int, activation: str = "relu"):
        self.units = units
        self.activation = activation
