use std::fmt;

use serde::{Deserialize, Serialize};

/// Handle to a net instance living inside a [`crate::SimulationState`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub usize);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A single component of a token tuple.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Str(String),
    /// Reference to a child net instance.
    Net(InstanceId),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_net(&self) -> Option<InstanceId> {
        match self {
            Value::Net(id) => Some(*id),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Str(s) => serde_json::Value::String(s.clone()),
            Value::Net(id) => serde_json::json!({ "net": id.0 }),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Net(id) => write!(f, "net{id}"),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

impl From<InstanceId> for Value {
    fn from(v: InstanceId) -> Self {
        Value::Net(v)
    }
}

/// A token is a tuple of values. The empty tuple is the plain black token
/// used by counter places.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(pub Vec<Value>);

impl Token {
    pub fn black() -> Self {
        Token(Vec::new())
    }

    pub fn is_black(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Value> {
        self.0.get(i)
    }

    pub fn int(&self, i: usize) -> Option<i64> {
        self.0.get(i).and_then(Value::as_int)
    }

    /// Child net handles carried by this token.
    pub fn nets(&self) -> impl Iterator<Item = InstanceId> + '_ {
        self.0.iter().filter_map(Value::as_net)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.0.iter().map(Value::to_json).collect())
    }
}

impl<V: Into<Value>> FromIterator<V> for Token {
    fn from_iter<I: IntoIterator<Item = V>>(iter: I) -> Self {
        Token(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

/// Builds a [`Token`] from a list of values convertible into [`Value`].
///
/// ```
/// use podnet_petri::{token, Value};
/// let t = token![1, "m1", true];
/// assert_eq!(t.0[1], Value::Str("m1".into()));
/// ```
#[macro_export]
macro_rules! token {
    () => { $crate::Token::black() };
    ($($v:expr),+ $(,)?) => { $crate::Token(vec![$($crate::Value::from($v)),+]) };
}
