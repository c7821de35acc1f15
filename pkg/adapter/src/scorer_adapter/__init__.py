"""Reference external scorer speaking the tamperloc wire protocol."""

from .models import StubModel, TransformersModel, build_model
from .serve import AdapterConfig, serve

__version__ = "0.1.0"
