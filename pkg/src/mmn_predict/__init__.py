"""Mean-mixture-of-normals modeling and predictive density estimation."""

from __future__ import annotations

__version__ = "0.1.0"
