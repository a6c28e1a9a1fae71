class SGDLike:
    def __init__(self, lr: float = 0.01):
        self.lr = lr
