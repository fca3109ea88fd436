use std::io::{self, Write};

use serde::Serialize;
use serde_json::json;

use crate::value::{InstanceId, Token};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Consume,
    Produce,
}

/// Tokens moved in one instance by one half of a firing.
#[derive(Clone, Debug, PartialEq)]
pub struct TracePart {
    pub instance: InstanceId,
    pub transition: String,
    pub tokens: Vec<(String, Token)>,
}

/// One trace record. A channel synchronization is a single event whose
/// parts cover both the parent and the child instance.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    /// Shared by the consume and produce halves of the same firing.
    pub firing: u64,
    pub phase: Phase,
    pub parts: Vec<TracePart>,
}

impl TraceEvent {
    /// Instance that initiated the firing (the parent for synchronized firings).
    pub fn net_instance_id(&self) -> InstanceId {
        self.parts[0].instance
    }

    /// Transition name; synchronized firings are labelled `parent/child`.
    pub fn transition_label(&self) -> String {
        self.parts.iter().map(|p| p.transition.as_str()).collect::<Vec<_>>().join("/")
    }

    pub fn involves(&self, instance: InstanceId, transition: &str) -> bool {
        self.parts.iter().any(|p| p.instance == instance && p.transition == transition)
    }

    pub fn part(&self, instance: InstanceId) -> Option<&TracePart> {
        self.parts.iter().find(|p| p.instance == instance)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let tokens: Vec<_> = self
            .parts
            .iter()
            .flat_map(|p| {
                p.tokens.iter().map(move |(place, tok)| {
                    json!({ "net_instance_id": p.instance.0, "place": place, "value": tok.to_json() })
                })
            })
            .collect();
        json!({
            "time": self.time,
            "net_instance_id": self.net_instance_id().0,
            "transition": self.transition_label(),
            "phase": self.phase,
            "tokens": tokens,
        })
    }
}

/// Append-only event log of a simulation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TraceEvent> {
        self.events.iter()
    }

    /// Newline-delimited JSON, one record per event.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, &e.to_json())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}
