"""Exception types raised across the package."""


class Scene4DError(Exception):
    """Base class for all package errors."""


class FieldError(Scene4DError):
    """Error tied to a named manifest/bundle field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class MissingFile(FieldError):
    pass


class SchemaViolation(FieldError):
    pass


class ShapeMismatch(FieldError):
    pass


class NonPositiveDepth(Scene4DError):
    pass


class TimestepMismatch(Scene4DError):
    pass


class DegenerateStatisticsWarning(UserWarning):
    """Too few depth-step samples to estimate a jump threshold."""


class NoAliveControls(Scene4DError):
    pass


class EmptyMembership(Scene4DError):
    pass


class EmptySet(Scene4DError):
    pass


class UnknownInstance(Scene4DError):
    def __init__(self, instance_id):
        self.instance_id = instance_id
        super().__init__(f"unknown instance id {instance_id}")


class BadInterval(Scene4DError):
    pass


class OutOfRange(Scene4DError):
    pass


class FrameUnavailable(Scene4DError):
    pass


class EndpointUnreachable(Scene4DError):
    pass


class BindFailure(Scene4DError):
    pass


class AllAxesMasked(Scene4DError):
    pass


class MissingScene(Scene4DError):
    def __init__(self, scene_id):
        self.scene_id = scene_id
        super().__init__(f"scene {scene_id!r} not available")


class RecipeInvalid(Scene4DError):
    pass
