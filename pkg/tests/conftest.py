import pathlib
import sys

# Allow running the tests straight from a checkout (src layout) without an
# editable install.
_SRC = pathlib.Path(__file__).resolve().parent.parent / "src"
if _SRC.is_dir():
    try:
        import fanetkeys  # noqa: F401
    except ImportError:
        sys.path.insert(0, str(_SRC))
