"""Exception types raised across the pipeline.

Every error carries a stable machine-readable ``code`` so callers (and the
CLI) can branch on the failure kind without parsing messages.
"""


class SpatialSimError(Exception):
    code = "ERROR"


class GenerationExhausted(SpatialSimError):
    code = "GENERATION_EXHAUSTED"


class UnknownRoom(SpatialSimError):
    code = "UNKNOWN_ROOM"


class UnreachableRoom(SpatialSimError):
    code = "UNREACHABLE_ROOM"


class TrajectoryTooLong(SpatialSimError):
    code = "TRAJECTORY_TOO_LONG"


class DegenerateGeometry(SpatialSimError):
    code = "DEGENERATE_GEOMETRY"


class DistractorCollision(SpatialSimError):
    code = "DISTRACTOR_COLLISION"


class NoPath(SpatialSimError):
    code = "NO_PATH"


class InsufficientPool(SpatialSimError):
    code = "INSUFFICIENT_POOL"

    def __init__(self, bucket, have, need):
        super().__init__(f"bucket {bucket[0]}/{bucket[1]}: have {have}, need {need}")
        self.bucket = bucket
        self.have = have
        self.need = need


class SchemaError(SpatialSimError):
    code = "SCHEMA_ERROR"

    def __init__(self, path, expected, found):
        super().__init__(f"{path}: expected {expected}, found {found}")
        self.path = path
        self.expected = expected
        self.found = found


class InvariantError(SpatialSimError):
    code = "INVARIANT_ERROR"

    def __init__(self, issues):
        super().__init__("; ".join(str(i) for i in issues))
        self.issues = list(issues)


class UnresolvableProvenance(SpatialSimError):
    code = "UNRESOLVABLE_PROVENANCE"
