"""
lcpnp exceptions
"""

import yaml_model


class HumanOutputError(object):
    """
    Mixin for an Exception that can be handled by user output of the string
    repr
    """
    human_str = True


class LcPnpError(Exception):
    """ Base for all errors raised by lcpnp """
    pass


class PreconditionError(LcPnpError, ValueError, HumanOutputError):
    """ Raised when the inputs to an operation break its preconditions """
    def __init__(self, message):
        super(PreconditionError, self).__init__(message)
        self.message = message

    def __str__(self):
        return self.message


class ValidationError(yaml_model.ValidationError, LcPnpError,
                      HumanOutputError):
    """
    Raised when a configuration, or interchange document is invalid. All
    problems found are collected in ``messages``
    """
    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]

        messages = list(messages)
        super(ValidationError, self).__init__(messages)
        self.messages = messages

    def __str__(self):
        return "Invalid input: %s" % '; '.join(self.messages)


class UsageError(LcPnpError, HumanOutputError):
    """ Raised for bad command line usage """
    no_rollbar = True

    def __init__(self, message):
        super(UsageError, self).__init__(message)
        self.message = message

    def __str__(self):
        return self.message


class NonPositiveDepthError(LcPnpError, HumanOutputError):
    """
    Raised when a point lies on, or behind the camera plane. ``index`` is the
    offending point, when known
    """
    def __init__(self, depth, index=None):
        super(NonPositiveDepthError, self).__init__()
        self.depth = depth
        self.index = index

    def __str__(self):
        if self.index is None:
            return "Point has non-positive depth %g" % self.depth

        return "Point %d has non-positive depth %g" % (self.index, self.depth)


class NearPiRotationError(LcPnpError, HumanOutputError):
    """ Raised when the rotation log is requested too close to pi """
    def __init__(self, angle):
        super(NearPiRotationError, self).__init__()
        self.angle = angle

    def __str__(self):
        return "Rotation angle %.12g is too close to pi for a unique log" % (
            self.angle,
        )


class MissingBBoxError(LcPnpError, HumanOutputError):
    """ Raised when a corner representation has no bounding box """
    def __init__(self, kind):
        super(MissingBBoxError, self).__init__()
        self.kind = kind

    def __str__(self):
        return "Representation '%s' requires bounding box corners" % (
            self.kind,
        )


class SingularHessianError(LcPnpError, HumanOutputError):
    """ Raised when a solver normal matrix can not be inverted """
    def __init__(self, condition=None, message=None):
        super(SingularHessianError, self).__init__()
        self.condition = condition
        self.message = message

    def __str__(self):
        if self.message is not None:
            return self.message

        if self.condition is None:
            return "Hessian is singular"

        return "Hessian is singular (condition number %.3g)" % self.condition


class DegenerateHessianError(SingularHessianError):
    """
    Raised when the NLL Hessian at the linearization point is too badly
    conditioned to invert
    """
    def __str__(self):
        if self.message is not None:
            return self.message

        if self.condition is None:
            return "Degenerate Hessian"

        return "Degenerate Hessian (condition number %.3g)" % self.condition


class MaxItersExceededError(LcPnpError, HumanOutputError):
    """
    Raised by strict solves that run out of iterations. The best iterate is
    kept in ``result``
    """
    def __init__(self, result):
        super(MaxItersExceededError, self).__init__()
        self.result = result

    def __str__(self):
        return "Solver did not converge in %d iterations (nll %.6g)" % (
            self.result.iters, self.result.final_nll,
        )


class NoConsensusError(LcPnpError, HumanOutputError):
    """ Raised when RANSAC finds no model supported by a minimal set """
    def __init__(self, message=None):
        super(NoConsensusError, self).__init__()
        self.message = message

    def __str__(self):
        return self.message or "No sampled model reached a consensus"


class SolverFailureError(LcPnpError, HumanOutputError):
    """ Raised when a solve inside an experiment fails """
    def __init__(self, cause):
        super(SolverFailureError, self).__init__()
        self.cause = cause

    def __str__(self):
        return "Solver failure: %s" % self.cause


class NonPositivePriorError(LcPnpError, HumanOutputError):
    """ Raised when the prior term of the LC loss is not positive """
    def __init__(self, value):
        super(NonPositivePriorError, self).__init__()
        self.value = value

    def __str__(self):
        return "Prior term must be positive, got %g" % self.value


class NonFiniteGradientError(LcPnpError, HumanOutputError):
    """ Raised when a loss gradient contains NaN, or infinite values """
    def __str__(self):
        return "Loss gradient is not finite"


class NegativeCovarianceError(LcPnpError, HumanOutputError):
    """ Raised when a covariance is further from PSD than roundoff allows """
    def __init__(self, eigenvalue):
        super(NegativeCovarianceError, self).__init__()
        self.eigenvalue = eigenvalue

    def __str__(self):
        return "Covariance has negative eigenvalue %g" % self.eigenvalue


class OutOfRangeError(LcPnpError, ValueError, HumanOutputError):
    """ Raised when a coordinate is outside of its codec range """
    def __init__(self, value, c_min, c_max):
        super(OutOfRangeError, self).__init__()
        self.value = value
        self.c_min = c_min
        self.c_max = c_max

    def __str__(self):
        return "Value %g is outside of [%g, %g]" % (
            self.value, self.c_min, self.c_max,
        )


class FrustumFailureError(LcPnpError, HumanOutputError):
    """ Raised when no pose inside the camera frustum could be sampled """
    def __init__(self, attempts):
        super(FrustumFailureError, self).__init__()
        self.attempts = attempts

    def __str__(self):
        return "No pose in the camera frustum after %d attempts" % (
            self.attempts,
        )


class AllResidualsZeroError(LcPnpError, HumanOutputError):
    """ Raised when gradient correctness has no point to judge """
    def __str__(self):
        return "Every residual is zero; correctness is undefined"
