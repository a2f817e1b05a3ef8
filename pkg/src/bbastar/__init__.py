__all__ = ["engine"]
