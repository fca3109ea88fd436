use thiserror::Error;

use crate::expr::EvalError;
use crate::value::InstanceId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructuralError {
    #[error("net `{net}`: place `{place}` declared twice")]
    DuplicatePlace { net: String, place: String },
    #[error("net `{net}`: transition `{transition}` declared twice")]
    DuplicateTransition { net: String, transition: String },
    #[error("net `{net}`: channel `{channel}` declared twice")]
    DuplicateChannel { net: String, channel: String },
    #[error("net `{net}`: arc of `{transition}` references unknown place `{place}`")]
    UnknownPlace { net: String, place: String, transition: String },
    #[error("net `{net}`: unknown transition `{transition}`")]
    UnknownTransition { net: String, transition: String },
    #[error("net `{net}`: arc between `{place}` and `{transition}` has weight 0")]
    ZeroWeight { net: String, place: String, transition: String },
    #[error("net `{net}`: transition `{transition}` uses undeclared channel `{channel}`")]
    UndeclaredChannel { net: String, transition: String, channel: String },
    #[error("net `{net}`: transition `{transition}` references unbound variable `{variable}`")]
    UnboundVariable { net: String, transition: String, variable: String },
    #[error("net `{net}`: transition `{transition}`: {reason}")]
    BadInscription { net: String, transition: String, reason: String },
    #[error("net `{net}`: transition `{transition}`: {reason}")]
    BadDelay { net: String, transition: String, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MarkingError {
    #[error("token placed in unknown place `{0}`")]
    UnknownPlace(String),
    #[error("token {token} has the wrong kind for place `{place}`")]
    WrongKind { place: String, token: String },
    #[error("token references instance {0} which is not live")]
    DeadReference(InstanceId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error(transparent)]
    Structural(#[from] StructuralError),
    #[error(transparent)]
    Marking(#[from] MarkingError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("binding for `{0}` is not enabled")]
    NotEnabled(String),
    #[error("event budget of {0} exhausted")]
    BudgetExceeded(u64),
    #[error("evaluating outputs of `{transition}`: {source}")]
    Eval { transition: String, source: EvalError },
    #[error(transparent)]
    Marking(#[from] MarkingError),
    #[error("unknown instance {0}")]
    UnknownInstance(InstanceId),
    #[error("no firing {0} is in flight")]
    NoSuchFiring(u64),
    #[error("cannot schedule at {time}, clock is already at {clock}")]
    PastTime { time: f64, clock: f64 },
}
