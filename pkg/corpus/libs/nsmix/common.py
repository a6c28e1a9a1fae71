class Conv:
    def __init__(self, channels: int):
        self.channels = channels
