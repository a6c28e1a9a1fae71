from collections import OrderedDict


class Config:
    def __init__(self, title: str):
        self.title = title
        self.entries: OrderedDict = OrderedDict()
