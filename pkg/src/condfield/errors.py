"""Exception type shared by every module.

Each error carries a short machine-readable ``code`` (``"empty-subset"``,
``"y-not-in-Y0"``, ...) so the CLI can map failures onto exit codes without
string matching on messages.
"""


class ConditioningError(ValueError):
    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)
