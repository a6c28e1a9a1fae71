import os


def checkpoint_path(run: str) -> str:
    return os.path.join("checkpoints", run)
