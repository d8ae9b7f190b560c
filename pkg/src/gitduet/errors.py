"""Exception hierarchy shared by every gitduet subsystem.

Each error carries a stable ``code`` string; the HTTP layer maps codes to
status codes in :mod:`gitduet.api.errormap`, and an exhaustiveness test keeps
that map total.
"""

from __future__ import annotations


class GitDuetError(Exception):
    code = "INTERNAL"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details


# --- sandbox / workspace -------------------------------------------------

class SetupScriptFailed(GitDuetError):
    code = "SETUP_SCRIPT_FAILED"

    def __init__(self, message: str = "", stderr: str = "", **details):
        super().__init__(message, **details)
        self.stderr = stderr


class IsolationUnavailable(GitDuetError):
    code = "ISOLATION_UNAVAILABLE"


class WorkspaceNotReady(GitDuetError):
    code = "WORKSPACE_NOT_READY"


class SessionAlreadyOpen(GitDuetError):
    code = "SESSION_ALREADY_OPEN"


class SessionClosed(GitDuetError):
    code = "SESSION_CLOSED"


class PathEscape(GitDuetError):
    code = "PATH_ESCAPE"


class FileNotFound(GitDuetError):
    code = "NOT_FOUND"


# --- repository state ----------------------------------------------------

class NotARepository(GitDuetError):
    code = "NOT_A_REPOSITORY"


class GitInvocationFailed(GitDuetError):
    code = "GIT_INVOCATION_FAILED"

    def __init__(self, message: str = "", stderr: str = "", **details):
        super().__init__(message, **details)
        self.stderr = stderr


class UnknownRef(GitDuetError):
    code = "UNKNOWN_REF"


class SnapshotTooLarge(GitDuetError):
    code = "SNAPSHOT_TOO_LARGE"


# --- wire protocol ---------------------------------------------------------

class MalformedFrame(GitDuetError):
    code = "MALFORMED_FRAME"


class UnknownVariant(GitDuetError):
    code = "UNKNOWN_VARIANT"


class OversizeFrame(GitDuetError):
    code = "OVERSIZE_FRAME"


class NotAMember(GitDuetError):
    code = "NOT_A_MEMBER"


# --- rooms -----------------------------------------------------------------

class UnknownExercise(GitDuetError):
    code = "UNKNOWN_EXERCISE"


class UnknownCode(GitDuetError):
    code = "UNKNOWN_CODE"


class RoomFull(GitDuetError):
    code = "ROOM_FULL"


class RoomFinished(GitDuetError):
    code = "ROOM_FINISHED"


class RoomDestroyed(GitDuetError):
    code = "ROOM_DESTROYED"


class UnknownMember(GitDuetError):
    code = "UNKNOWN_MEMBER"


class AlreadyConfirmed(GitDuetError):
    code = "ALREADY_CONFIRMED"


class NoMoreTasks(GitDuetError):
    code = "NO_MORE_TASKS"


# --- exercises ---------------------------------------------------------------

class ManifestInvalid(GitDuetError):
    code = "MANIFEST_INVALID"


class ScriptFailed(GitDuetError):
    code = "SCRIPT_FAILED"

    def __init__(self, message: str = "", stderr: str = "", **details):
        super().__init__(message, **details)
        self.stderr = stderr


class CheckpointMissing(GitDuetError):
    code = "CHECKPOINT_MISSING"


class IncompleteOutcomes(GitDuetError):
    code = "INCOMPLETE_OUTCOMES"
