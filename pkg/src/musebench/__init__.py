"""musebench: multi-locality recursive search for variational quantum learners."""

__version__ = "0.1.0"
