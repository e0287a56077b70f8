"""Exception hierarchy shared by all formlab modules."""


class FormLabError(Exception):
    """Base class for all errors raised by formlab."""


class DivisionByZero(FormLabError):
    pass


class FieldMismatch(FormLabError):
    pass


class AmbientMismatch(FormLabError):
    pass


class CapExceeded(FormLabError):
    """A desk-scale enumeration would exceed its configured cap."""


class ParameterMismatch(FormLabError):
    pass


class NotIsotropic(FormLabError):
    pass


class RadicalNotSubspace(FormLabError):
    pass


class Degenerate(FormLabError):
    pass


class WitnessMismatch(FormLabError):
    pass


class BadAlpha(FormLabError):
    pass


class BadZ0(FormLabError):
    pass


class NotInBuilding(FormLabError):
    pass


class NotGraded(FormLabError):
    pass


class NotCohenMacaulay(FormLabError):
    pass


class NotAnAutomorphism(FormLabError):
    pass


class NotAnAction(FormLabError):
    pass


class ElementsUnavailable(FormLabError):
    pass


class SequenceBroken(FormLabError):
    pass
