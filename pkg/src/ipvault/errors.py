"""Exception hierarchy shared by every ipvault module."""


class IPVaultError(Exception):
    """Base class for all ipvault errors."""


class DomainError(IPVaultError, ValueError):
    """An argument lies outside the domain of the operation."""


class NotInvertible(DomainError):
    """Raised by mod_inv; ``gcd`` is the common factor that blocked inversion."""

    def __init__(self, a, m, gcd):
        super().__init__(f"{a} is not invertible modulo {m} (gcd {gcd})")
        self.a = a
        self.m = m
        self.gcd = gcd


class FactorFailure(IPVaultError):
    """Miller's reduction exhausted its bases without splitting the modulus."""


class AttackInconsistent(IPVaultError):
    """A key-extraction attack found the white-box malformed.

    ``verdict`` names the check that failed.
    """

    def __init__(self, verdict, detail=""):
        msg = verdict if not detail else f"{verdict}: {detail}"
        super().__init__(msg)
        self.verdict = verdict
        self.detail = detail


class KeyTooSmall(DomainError):
    pass


class UnwrapError(IPVaultError):
    pass


class DigestMismatch(IPVaultError):
    def __init__(self, keyname):
        super().__init__(f"digest mismatch for tool block {keyname!r}")
        self.keyname = keyname


class PaddingError(IPVaultError):
    pass


class NoSuchToolBlock(IPVaultError, KeyError):
    def __init__(self, keyname):
        super().__init__(keyname)
        self.keyname = keyname

    def __str__(self):
        return f"no tool block for key {self.keyname!r}"


class ParseError(IPVaultError, ValueError):
    """Malformed input file. ``line`` is 1-based; ``None`` means end of file."""

    def __init__(self, message, line=None):
        where = "EOF" if line is None else f"line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.message = message
