class RcbkitError(ValueError):
    """Root of every domain error raised by rcbkit.

    Subclasses live next to the code that raises them. The command line maps
    any ``RcbkitError`` to exit status 2.
    """
