from .executor import thread_map

__all__ = ["thread_map"]
