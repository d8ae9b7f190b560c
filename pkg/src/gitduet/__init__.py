"""gitduet: a paired Git practice server.

Provisions twin sandboxed workspaces wired to one shared remote, mirrors
each learner's activity to the partner in real time, and grades exercises
by repository-state equivalence.
"""

__version__ = "0.1.0"
