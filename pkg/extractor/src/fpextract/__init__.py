"""Batch image fingerprint extraction for the similar-item search engine."""

from .manifest import ExtractionManifest, InputImage, Preprocess
from .sirv import SirvIntegrityError, VerifyReport, read_sirv, verify_sirv, write_sirv

__all__ = [
    "ExtractionManifest",
    "InputImage",
    "Preprocess",
    "SirvIntegrityError",
    "VerifyReport",
    "read_sirv",
    "verify_sirv",
    "write_sirv",
]

__version__ = "0.1.0"
