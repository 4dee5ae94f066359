"""Exception hierarchy.

Three families map onto the CLI exit codes: parse problems (exit 2),
validation/spec problems (exit 3) and sampling problems (exit 4).
"""


class DenmaError(Exception):
    """Base class for all package errors."""


class ParseError(DenmaError):
    """Malformed input file."""


class MissingColumn(ParseError):
    def __init__(self, column):
        super().__init__(f"required column {column!r} is missing")
        self.column = column


class NonNumericDose(ParseError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: dose {value!r} is not numeric")
        self.row = row


class InvalidValue(ParseError):
    def __init__(self, row, message):
        super().__init__(f"row {row}: {message}")
        self.row = row


class EventsExceedN(ParseError):
    def __init__(self, row, study_id, events, sample_size):
        super().__init__(
            f"row {row} (study {study_id!r}): events {events} exceed sample size {sample_size}"
        )
        self.row = row
        self.study_id = study_id


class DuplicateArm(ParseError):
    def __init__(self, row, study_id, agent_id, dose):
        super().__init__(
            f"row {row}: study {study_id!r} already has an arm for ({agent_id!r}, {dose:g})"
        )
        self.row = row


class ValidationError(DenmaError):
    """Dataset/spec combination cannot be modelled."""


class MissingEquivalence(ValidationError):
    def __init__(self, agent_id):
        super().__init__(f"no dose-equivalence factor for agent {agent_id!r}")
        self.agent_id = agent_id


class MissingCovariate(ValidationError):
    def __init__(self, study_id, name):
        super().__init__(f"study {study_id!r} has no covariate {name!r}")
        self.study_id = study_id
        self.name = name


class MissingKnots(ValidationError):
    def __init__(self, agent_id):
        super().__init__(f"no knot set for agent {agent_id!r}")
        self.agent_id = agent_id


class TooFewDistinctDoses(ValidationError):
    def __init__(self, agent_id, count):
        super().__init__(
            f"agent {agent_id!r} has {count} distinct dose(s); knot placement needs at least 3"
        )
        self.agent_id = agent_id
        self.count = count


class TooFewPlaceboArms(ValidationError):
    def __init__(self, count):
        super().__init__(f"placebo response model needs at least 2 placebo arms, found {count}")
        self.count = count


class UnknownAgent(ValidationError):
    def __init__(self, agent_id):
        super().__init__(f"agent {agent_id!r} is not part of the fitted model")
        self.agent_id = agent_id


class SpecDatasetMismatch(ValidationError):
    """Model specification is inconsistent with the dataset."""


class DisconnectedNetwork(ValidationError):
    def __init__(self, n_components):
        super().__init__(
            f"comparison network has {n_components} components; only exchangeable/common "
            "across-agent shape assumptions can bridge a disconnected network"
        )
        self.n_components = n_components


class DimensionMismatch(ValidationError):
    """Parameter state does not match the model layout."""


class LayoutMismatch(ValidationError):
    """Truth record and posterior draws describe different parameter sets."""


class ModelDatasetMismatch(ValidationError):
    """Draws were produced for a different model/dataset."""


class TooFewDraws(ValidationError):
    def __init__(self, message):
        super().__init__(message)


class SamplingError(DenmaError):
    """Failure while running the sampler."""


class InitializationFailure(SamplingError):
    def __init__(self, chain, tries):
        super().__init__(
            f"chain {chain}: no finite log-posterior start found after {tries} attempts"
        )
        self.chain = chain


class RunDirError(DenmaError):
    """Problems with persisted run directories."""


class MissingRunDir(RunDirError):
    def __init__(self, path):
        super().__init__(f"{path} is not a run directory (no manifest.json)")
        self.path = path


class StaleManifest(RunDirError):
    def __init__(self, path, detail):
        super().__init__(f"manifest check failed for {path}: {detail}")
        self.path = path
