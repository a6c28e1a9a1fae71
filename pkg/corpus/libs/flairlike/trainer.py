from flairlike.optim import SGDLike


def prepare(tagger):
    # Stash the optimizer class on the instance; only ever set here.
    tagger.optimizer_class = SGDLike
    return tagger
