"""Local error-bound analysis of composite-convex inequalities f(g(x)) <= 0."""

__version__ = "1.0.0"
