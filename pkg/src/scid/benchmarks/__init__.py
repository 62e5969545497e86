"""Bundled benchmark programs, platforms and component libraries."""

from importlib import resources


def path(name: str):
    """Filesystem path of a bundled benchmark file."""
    ref = resources.files(__package__).joinpath(name)
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled benchmark {name!r}")
    return str(ref)


def read_text(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text()


def available() -> list[str]:
    out = []
    for entry in resources.files(__package__).iterdir():
        if entry.name.endswith((".mc", ".json")):
            out.append(entry.name)
    return sorted(out)
