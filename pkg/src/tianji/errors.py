"""Exception taxonomy shared across the workbench.

Every error raised by the package derives from TianjiError.  The five
classifiable fault types used by the recovery bus carry canonical message
shapes so that classification can work from the message text alone.
"""


class TianjiError(Exception):
    """Base class for all package errors."""


# --- configuration / parsing -------------------------------------------------

class ConfigError(TianjiError):
    """Bad run configuration (backend URI, missing file, bad flag value)."""


class ParseError(TianjiError):
    """Malformed text input; message carries a line number when known."""


class DuplicateKey(ParseError):
    """Two scenario entries share the same (agent, step) key."""


# --- agent backend ------------------------------------------------------------

class ScriptExhausted(TianjiError):
    """A scripted agent was asked for more actions than the scenario holds."""


class MalformedOutput(TianjiError):
    """An agent output failed structural validation."""


class ProviderUnavailable(TianjiError):
    """A retrieval or agent provider cannot be reached."""


# --- debate protocol ----------------------------------------------------------

class ProtocolViolation(TianjiError):
    """An agent emitted an output that is illegal for the current phase."""


class UnknownAgent(TianjiError):
    pass


class UnknownHypothesis(TianjiError):
    pass


# --- orchestration ------------------------------------------------------------

class UnknownTool(TianjiError):
    pass


class ArgValidation(TianjiError):
    """Tool arguments failed validation against the tool's parameter spec."""


class PlannerMayNotExecute(TianjiError):
    """Meta-planner identities are refused direct tool execution."""


class InvalidPlan(TianjiError):
    """A roadmap failed validation (cycle, unknown worker spec, bad ids)."""


class SubtaskFailed(TianjiError):
    """A subtask failed and no repair path remained."""


class VerificationFailed(TianjiError):
    """State revision rejected a subtask and no revision path remained."""


class LoopBudgetExhausted(TianjiError):
    """An agent loop ran past its tool-call budget without terminating."""


# --- recovery -----------------------------------------------------------------

class NoRepairKnown(TianjiError):
    """No repair template exists for the failure at hand."""


class RepairBudgetExhausted(TianjiError):
    pass


# --- classifiable faults (recovery rule table) ---------------------------------

class PrefixMismatch(TianjiError):
    """Namelist input prefix does not match the files on disk."""


class MissingVariableTable(TianjiError):
    """The variable-table file for input decoding is absent."""


class VerticalLevelMismatch(TianjiError):
    """Configured e_vert disagrees with the level count of the inputs."""


class TensorDimMismatch(TianjiError):
    """Two tensors disagree on an axis length."""


class ShapeMismatch(TensorDimMismatch):
    """Raised by tensor ops; classifies as TensorDimMismatch on the recovery bus."""


class ParallelOverflow(TianjiError):
    """Requested parallelism exceeded the configured worker cap."""


# --- simulator ----------------------------------------------------------------

class CflViolation(TianjiError):
    pass


class NonFinite(TianjiError):
    """A prognostic field stopped being finite; state was dumped for autopsy."""


class BadMagic(TianjiError):
    pass


class TruncatedFile(TianjiError):
    """File length does not match header arithmetic."""


class VersionUnsupported(TianjiError):
    pass


class UnknownVariable(TianjiError):
    pass


# --- analysis -----------------------------------------------------------------

class OutOfBounds(TianjiError):
    pass


class EmptyTensor(TianjiError):
    pass


class LostFeature(TianjiError):
    """Feature tracking found no candidate cell within the search radius."""


class EmptyIntersection(TianjiError):
    """A geometry mask selected no cells."""


class AllMasked(TianjiError):
    pass


class TimeAxisMismatch(TianjiError):
    pass


class EmptyBinSetOnly(TianjiError):
    """Radial profile found no cell within r_max of the centre."""


class EmptySeries(TianjiError):
    pass


# --- visualization ------------------------------------------------------------

class UnknownColormap(TianjiError):
    pass


class IoError(TianjiError):
    """Filesystem write failed while emitting an artifact."""
