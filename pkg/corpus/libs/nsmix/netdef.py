from common import Conv


class Net:
    def __init__(self, name: str):
        self.name = name
        self.conv = Conv(3)
