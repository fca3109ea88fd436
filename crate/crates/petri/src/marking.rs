use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use crate::binding::{self, EnabledBinding};
use crate::error::{MarkingError, NetError, StructuralError};
use crate::net::{CompiledNet, NetDefinition};
use crate::value::{InstanceId, Token};

/// Token distribution over named places, used to describe initial markings
/// and to take snapshots.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Marking {
    places: BTreeMap<String, Vec<Token>>,
}

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, place: &str, token: crate::Token) -> Self {
        self.add(place, token);
        self
    }

    pub fn with_n(mut self, place: &str, n: usize, token: crate::Token) -> Self {
        for _ in 0..n {
            self.add(place, token.clone());
        }
        self
    }

    pub fn add(&mut self, place: &str, token: Token) {
        self.places.entry(place.to_owned()).or_default().push(token);
    }

    pub fn tokens(&self, place: &str) -> &[Token] {
        self.places.get(place).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn count(&self, place: &str) -> usize {
        self.tokens(place).len()
    }

    pub fn total(&self) -> usize {
        self.places.values().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Token])> {
        self.places.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

pub type TokenId = u64;

/// A validated net definition that can be instantiated many times.
#[derive(Clone, Debug)]
pub struct Net(pub(crate) Arc<CompiledNet>);

impl Net {
    pub fn new(definition: &NetDefinition) -> Result<Net, StructuralError> {
        Ok(Net(Arc::new(definition.compile()?)))
    }

    pub fn definition(&self) -> &NetDefinition {
        &self.0.def
    }

    pub fn instantiate(&self, initial: &Marking) -> Result<NetInstance, MarkingError> {
        let mut inst = NetInstance {
            net: self.0.clone(),
            places: vec![VecDeque::new(); self.0.def.places.len()],
            next_token: 0,
        };
        for (place, tokens) in initial.iter() {
            for t in tokens {
                inst.add_token(place, t.clone())?;
            }
        }
        Ok(inst)
    }
}

/// Validates `definition` and installs `initial`. No events are scheduled.
pub fn build_net(definition: &NetDefinition, initial: &Marking) -> Result<NetInstance, NetError> {
    Ok(Net::new(definition)?.instantiate(initial)?)
}

/// One live copy of a net together with its current marking. Tokens in each
/// place are kept in insertion order.
#[derive(Clone, Debug)]
pub struct NetInstance {
    pub(crate) net: Arc<CompiledNet>,
    pub(crate) places: Vec<VecDeque<(TokenId, Token)>>,
    next_token: TokenId,
}

impl NetInstance {
    pub fn definition(&self) -> &NetDefinition {
        &self.net.def
    }

    pub fn name(&self) -> &str {
        &self.net.def.name
    }

    pub fn tokens(&self, place: &str) -> impl Iterator<Item = &Token> {
        self.net
            .place_index
            .get(place)
            .map(|&i| self.places[i].iter())
            .into_iter()
            .flatten()
            .map(|(_, t)| t)
    }

    pub fn count(&self, place: &str) -> usize {
        self.net.place_index.get(place).map_or(0, |&i| self.places[i].len())
    }

    pub fn marking(&self) -> Marking {
        let mut m = Marking::new();
        for (i, tokens) in self.places.iter().enumerate() {
            for (_, t) in tokens {
                m.add(self.net.place_name(i), t.clone());
            }
        }
        m
    }

    /// Enabled bindings of this instance on its own: transitions that need a
    /// channel partner are never enabled here.
    pub fn enabled_bindings(&self) -> Vec<EnabledBinding> {
        let lookup = |_: InstanceId| -> Option<&NetInstance> { None };
        (0..self.net.transitions.len())
            .flat_map(|t| binding::enumerate(&lookup, InstanceId(0), self, t, None))
            .collect()
    }

    pub fn add_token(&mut self, place: &str, token: Token) -> Result<TokenId, MarkingError> {
        let &idx = self
            .net
            .place_index
            .get(place)
            .ok_or_else(|| MarkingError::UnknownPlace(place.to_owned()))?;
        self.insert(idx, token)
    }

    pub(crate) fn insert(&mut self, idx: usize, token: Token) -> Result<TokenId, MarkingError> {
        let place = &self.net.def.places[idx];
        if !place.kind.admits(&token) {
            return Err(MarkingError::WrongKind { place: place.name.clone(), token: token.to_string() });
        }
        let id = self.next_token;
        self.next_token += 1;
        self.places[idx].push_back((id, token));
        Ok(id)
    }

    pub(crate) fn remove(&mut self, idx: usize, id: TokenId) -> Option<Token> {
        let pos = self.places[idx].iter().position(|(t, _)| *t == id)?;
        self.places[idx].remove(pos).map(|(_, t)| t)
    }
}
