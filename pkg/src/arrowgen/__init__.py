"""Random-walk diffusion graph generation with a GCN edge filter."""

__version__ = "0.1.0"

__all__ = [
    "autodiff",
    "checkpoint",
    "denoiser",
    "diffusion",
    "generator",
    "gnn",
    "graph",
    "metrics",
    "walks",
]


def __getattr__(name):
    # Lazy submodule access keeps `import arrowgen` light so the CLI can pin
    # BLAS thread counts before numpy loads.
    if name in __all__:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(name)
