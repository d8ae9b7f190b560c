"""Total mapping from domain errors to HTTP responses.

Every GitDuetError subclass must appear here; tests enumerate the errors
module and fail when a new error lacks a mapping.
"""

from __future__ import annotations

from .. import errors as E

ERROR_STATUS: dict[type, int] = {
    E.SetupScriptFailed: 500,
    E.IsolationUnavailable: 503,
    E.WorkspaceNotReady: 409,
    E.SessionAlreadyOpen: 409,
    E.SessionClosed: 409,
    E.PathEscape: 400,
    E.FileNotFound: 404,
    E.NotARepository: 400,
    E.GitInvocationFailed: 500,
    E.UnknownRef: 404,
    E.SnapshotTooLarge: 413,
    E.MalformedFrame: 400,
    E.UnknownVariant: 400,
    E.OversizeFrame: 413,
    E.NotAMember: 403,
    E.UnknownExercise: 404,
    E.UnknownCode: 404,
    E.RoomFull: 409,
    E.RoomFinished: 409,
    E.RoomDestroyed: 404,
    E.UnknownMember: 403,
    E.AlreadyConfirmed: 409,
    E.NoMoreTasks: 409,
    E.ManifestInvalid: 400,
    E.ScriptFailed: 500,
    E.CheckpointMissing: 500,
    E.IncompleteOutcomes: 400,
    E.GitDuetError: 500,
}


def status_for(exc: E.GitDuetError) -> int:
    for cls in type(exc).__mro__:
        if cls in ERROR_STATUS:
            return ERROR_STATUS[cls]
    return 500
