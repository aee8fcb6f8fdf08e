"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: input/config problems map to 2,
backend availability problems to 3, internal assertion failures to 4.
"""


class MeshsegError(Exception):
    """Base class for all package errors."""


class InputError(MeshsegError):
    """Base for errors caused by bad user input (CLI exit code 2)."""


class ParseError(InputError):
    """Malformed record in a mesh or label file; carries a line number when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class UnsupportedFormat(InputError):
    """File extension or header not recognized as a supported format."""


class DegenerateGeometry(InputError):
    """Mesh has no usable geometry (all faces degenerate or all points coincide)."""


class IoError(InputError):
    """File could not be read or written."""


class ConfigError(InputError):
    """Configuration value violates an invariant."""


class MissingTexture(InputError):
    """Textured shading requested for a mesh without UVs and a texture bitmap."""


class DimensionMismatch(InputError):
    """Two images that must share dimensions do not."""


class EmptyRender(MeshsegError):
    """Render produced no foreground pixels where some were required."""


class LengthMismatch(InputError):
    """Per-face array length does not match the mesh face count."""


class TopologyMismatch(InputError):
    """Two meshes required to share face topology do not."""


class MeshMismatch(InputError):
    """Segmentation results that must refer to the same mesh do not."""


class UnknownLabel(InputError):
    """Referenced label id is absent from the ground truth."""


class LabelMismatch(InputError):
    """Oracle ground-truth labels are inconsistent with the render's mesh."""


class BackendError(MeshsegError):
    """Base for grounding-backend failures (CLI exit code 3)."""


class BackendUnavailable(BackendError):
    """HTTP backend could not be reached or answered with a server error."""


class MissingPrecomputed(BackendError):
    """File backend is missing a recorded artifact for the requested view."""
