"""Pixel raster types, PNM file I/O and convolution primitives."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import ndimage

from utils.errors import (
    IoFailure,
    KernelTooLarge,
    MalformedHeader,
    TruncatedData,
    UnsupportedMaxval,
)

logger = logging.getLogger(__name__)

# Luma weights for color to intensity conversion
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _as_pixels(data) -> np.ndarray:
    """Contiguous uint8 array; values outside [0, 255] raise instead of wrapping."""
    array = np.asarray(data)
    if array.dtype != np.uint8 and array.dtype != bool and array.size:
        low, high = array.min(), array.max()
        if not (low >= 0 and high <= 255):
            raise ValueError(f"Pixel values must lie in [0, 255], got [{low}, {high}]")
    return np.ascontiguousarray(array, dtype=np.uint8)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major 8-bit intensity raster, shape (height, width)."""

    data: np.ndarray

    def __post_init__(self):
        data = _as_pixels(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"GrayImage needs a non-empty 2D array, got shape {data.shape}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.data, other.data)

    @classmethod
    def from_raster(cls, raster: np.ndarray) -> "GrayImage":
        """Round and clamp a real raster into an intensity image."""
        return cls(np.clip(np.floor(np.asarray(raster, dtype=float) + 0.5), 0, 255))


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Row-major 8-bit color raster, shape (height, width, 3)."""

    data: np.ndarray

    def __post_init__(self):
        data = _as_pixels(self.data)
        if data.ndim != 3 or data.shape[2] != 3 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"RgbImage needs an (h, w, 3) array, got shape {data.shape}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, RgbImage) and np.array_equal(self.data, other.data)

    @classmethod
    def from_gray(cls, image: GrayImage) -> "RgbImage":
        return cls(np.repeat(image.data[:, :, None], 3, axis=2))


@dataclass(frozen=True, eq=False)
class Kernel:
    """Square correlation kernel of odd size."""

    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 2 or weights.shape[0] != weights.shape[1]:
            raise ValueError("Kernel weights must be a square matrix")
        if weights.shape[0] % 2 == 0:
            raise ValueError(f"Kernel size must be odd, got {weights.shape[0]}")
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def identity(cls, size: int = 3) -> "Kernel":
        weights = np.zeros((size, size))
        weights[size // 2, size // 2] = 1.0
        return cls(weights)

    @classmethod
    def box(cls, size: int = 3) -> "Kernel":
        return cls(np.full((size, size), 1.0 / (size * size)))


Image = Union[GrayImage, RgbImage]


def as_raster(image: Union[GrayImage, np.ndarray]) -> np.ndarray:
    """Return a float64 view of an intensity image or real raster."""
    if isinstance(image, GrayImage):
        return image.data.astype(float)
    return np.asarray(image, dtype=float)


def _read_token(buffer: bytes, pos: int) -> tuple:
    """Read one whitespace-delimited header token, skipping '#' comments."""
    length = len(buffer)
    while pos < length:
        char = buffer[pos:pos + 1]
        if char == b"#":
            while pos < length and buffer[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif char.isspace():
            pos += 1
        else:
            break

    start = pos
    while pos < length and not buffer[pos:pos + 1].isspace() and buffer[pos:pos + 1] != b"#":
        pos += 1

    if start == pos:
        raise MalformedHeader("Unexpected end of PNM header")

    return buffer[start:pos], pos


def load_pnm(path: Union[str, Path]) -> Image:
    """
    Load a binary PNM file (P5 gray or P6 RGB, maxval 255).

    Args:
        path: Path to the file

    Returns:
        GrayImage for P5, RgbImage for P6
    """
    try:
        buffer = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(f"Cannot read {path}: {e}") from e

    magic = buffer[:2]
    if magic not in (b"P5", b"P6"):
        raise MalformedHeader(f"Unsupported magic {magic!r} in {path}")

    pos = 2
    try:
        tokens = []
        for _ in range(3):
            token, pos = _read_token(buffer, pos)
            tokens.append(int(token))
    except ValueError as e:
        raise MalformedHeader(f"Non-numeric PNM header field in {path}") from e

    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise MalformedHeader(f"Invalid dimensions {width}x{height} in {path}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} not supported (only 255)")

    if pos >= len(buffer) or not buffer[pos:pos + 1].isspace():
        raise MalformedHeader("Missing whitespace after PNM header")
    pos += 1

    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    payload = buffer[pos:pos + expected]
    if len(payload) < expected:
        raise TruncatedData(f"Expected {expected} bytes of pixel data, found {len(payload)}")

    pixels = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        return GrayImage(pixels.reshape(height, width))
    return RgbImage(pixels.reshape(height, width, 3))


def save_pnm(image: Image, path: Union[str, Path]) -> None:
    """
    Save an image as binary PNM (P5 for gray, P6 for RGB).

    Args:
        image: Image to save
        path: Destination file path
    """
    magic = "P5" if isinstance(image, GrayImage) else "P6"
    header = f"{magic}\n{image.width} {image.height}\n255\n".encode("ascii")

    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(image.data.tobytes())
    except OSError as e:
        raise IoFailure(f"Cannot write {path}: {e}") from e

    logger.debug(f"Saved {magic} {image.width}x{image.height} to {path}")


def save_raster(raster: np.ndarray, path: Union[str, Path], vmax: Optional[float] = None) -> None:
    """Quantize a real raster linearly onto [0, 255] and save it as P5."""
    raster = np.asarray(raster, dtype=float)
    top = float(vmax) if vmax is not None else float(np.nanmax(raster)) if raster.size else 0.0
    if top <= 0:
        scaled = np.zeros_like(raster)
    else:
        scaled = np.nan_to_num(raster, nan=0.0) / top * 255.0
    save_pnm(GrayImage.from_raster(scaled), path)


def to_gray(image: RgbImage) -> GrayImage:
    """Convert RGB to intensity with luma weights, rounding half up."""
    luma = image.data.astype(float) @ LUMA_WEIGHTS
    return GrayImage.from_raster(luma)


def convolve(image: Union[GrayImage, np.ndarray], kernel: Kernel) -> np.ndarray:
    """
    Correlate an image with a kernel using replicate borders.

    output[y][x] = sum kernel[j][i] * input[clamp(y+j-c)][clamp(x+i-c)], c = size // 2

    Args:
        image: Intensity image or real raster
        kernel: Odd-sized kernel

    Returns:
        Real-valued raster with the input's dimensions
    """
    raster = as_raster(image)
    if kernel.size > min(raster.shape):
        raise KernelTooLarge(
            f"Kernel size {kernel.size} exceeds image {raster.shape[1]}x{raster.shape[0]}"
        )
    return ndimage.correlate(raster, kernel.weights, mode="nearest")
