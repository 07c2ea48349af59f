"""BEV-conditioned radiance fields: semantic top-down maps drive a
translation-equivariant synthesis pipeline whose local outputs stitch into
unbounded panoramas."""

__version__ = "0.1.0"
