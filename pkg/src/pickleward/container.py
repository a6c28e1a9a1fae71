"""Reading model files: bare pickle streams and ZIP archives.

Model checkpoints are often ZIP archives with the pickle program stored as
one member (conventionally ``data.pkl``) next to raw weight blobs. Every
tool here accepts either form; detection is by the ZIP local-file-header
magic, not the file extension.
"""

from __future__ import annotations

import zipfile
from pathlib import Path

from .errors import ParseError

ZIP_MAGIC = b"PK\x03\x04"
DEFAULT_MEMBER = "data.pkl"


def is_zip(data: bytes) -> bool:
    return data[:4] == ZIP_MAGIC


def _pick_member(names: list[str], member: str | None, path: Path) -> str:
    if member is not None:
        if member in names:
            return member
        matches = [n for n in names if n.endswith("/" + member)
                   or n == member]
        if len(matches) == 1:
            return matches[0]
        raise ParseError(
            f"{path}: archive member {member!r} not found "
            f"(members: {', '.join(sorted(names)[:10])})")
    matches = [n for n in names if n == DEFAULT_MEMBER
               or n.endswith("/" + DEFAULT_MEMBER)]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise ParseError(
            f"{path}: no {DEFAULT_MEMBER!r} member in archive; "
            f"pass an explicit member name")
    raise ParseError(
        f"{path}: multiple {DEFAULT_MEMBER!r} members "
        f"({', '.join(sorted(matches))}); pass an explicit member name")


def read_pickle_bytes(path: Path | str, member: str | None = None) -> bytes:
    """Return the pickle program bytes from a bare file or a ZIP member."""
    path = Path(path)
    data = path.read_bytes()
    if not is_zip(data):
        if member is not None:
            raise ParseError(f"{path}: not a ZIP archive, "
                             f"--member has no meaning here")
        return data
    try:
        with zipfile.ZipFile(path) as archive:
            names = archive.namelist()
            chosen = _pick_member(names, member, path)
            return archive.read(chosen)
    except zipfile.BadZipFile as exc:
        raise ParseError(f"{path}: bad ZIP archive ({exc})") from exc
