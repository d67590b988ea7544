"""Exception types shared across the package.

Every failure carries a short machine-readable ``code`` (for example
``"empty-circle"``) so that callers and the command line front end can
branch on it without parsing messages.
"""


class GmcError(Exception):
    """Invalid input or a failed numerical step.

    Attributes
    ----------
    code : str
        Stable kebab-case identifier of the failure.
    exit_code : int
        Process exit status used by the CLI.
    """

    exit_code = 2

    def __init__(self, code, message=""):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}" if message else code)


class BudgetError(GmcError):
    """A requested computation exceeds a configured resource budget."""

    exit_code = 3
