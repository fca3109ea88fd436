//! Static net structure: places, transitions, arcs, guards and channels.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dist::DelayDistribution;
use crate::error::StructuralError;
use crate::expr::Expr;
use crate::value::Token;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlaceKind {
    /// Tuples of plain values, no net references.
    Tuple,
    /// Tuples holding at least one child-net handle.
    NetRef,
    /// Black tokens only; the place is a counter.
    Counter,
}

impl PlaceKind {
    pub fn admits(self, token: &Token) -> bool {
        match self {
            PlaceKind::Tuple => token.nets().next().is_none(),
            PlaceKind::NetRef => token.nets().next().is_some(),
            PlaceKind::Counter => token.is_black(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlaceDef {
    pub name: String,
    pub kind: PlaceKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcDirection {
    /// Place to transition; tokens are consumed.
    Input,
    /// Place to transition; tokens are tested but not consumed.
    Read,
    /// Transition to place.
    Output,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArcDef {
    pub place: String,
    pub transition: String,
    pub direction: ArcDirection,
    pub weight: u32,
    pub inscription: Vec<Expr>,
}

/// `:label(args)` on a child transition, or the `label(args)` half of a downlink.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRef {
    pub label: String,
    pub args: Vec<Expr>,
}

/// `net:label(args)`: synchronize with a transition of the child net bound to `net`.
#[derive(Clone, Debug, PartialEq)]
pub struct Downlink {
    pub net: String,
    pub channel: ChannelRef,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransitionDef {
    pub name: String,
    pub guard: Option<Expr>,
    pub uplink: Option<ChannelRef>,
    pub downlink: Option<Downlink>,
    /// Transitions sharing a race label compete: each samples a delay and
    /// only the earliest one fires.
    pub race: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetDefinition {
    pub name: String,
    pub places: Vec<PlaceDef>,
    pub transitions: Vec<TransitionDef>,
    pub arcs: Vec<ArcDef>,
    pub channels: Vec<String>,
    /// Transitions without an entry are immediate.
    pub timing: BTreeMap<String, DelayDistribution>,
}

/// Fluent construction of a [`NetDefinition`]. No validation happens here;
/// [`crate::build_net`] validates.
#[derive(Clone, Debug, Default)]
pub struct NetBuilder {
    def: NetDefinition,
}

impl NetBuilder {
    pub fn new(name: &str) -> Self {
        NetBuilder { def: NetDefinition { name: name.to_owned(), ..Default::default() } }
    }

    pub fn place(mut self, name: &str, kind: PlaceKind) -> Self {
        self.def.places.push(PlaceDef { name: name.to_owned(), kind });
        self
    }

    pub fn channel(mut self, label: &str) -> Self {
        self.def.channels.push(label.to_owned());
        self
    }

    pub fn transition(mut self, t: TransitionBuilder) -> Self {
        let TransitionBuilder { def, arcs, delay } = t;
        if let Some(d) = delay {
            self.def.timing.insert(def.name.clone(), d);
        }
        self.def.arcs.extend(arcs);
        self.def.transitions.push(def);
        self
    }

    pub fn build(self) -> NetDefinition {
        self.def
    }
}

#[derive(Clone, Debug)]
pub struct TransitionBuilder {
    def: TransitionDef,
    arcs: Vec<ArcDef>,
    delay: Option<DelayDistribution>,
}

impl TransitionBuilder {
    pub fn new(name: &str) -> Self {
        TransitionBuilder {
            def: TransitionDef { name: name.to_owned(), ..Default::default() },
            arcs: Vec::new(),
            delay: None,
        }
    }

    fn arc(mut self, place: &str, direction: ArcDirection, weight: u32, inscription: Vec<Expr>) -> Self {
        self.arcs.push(ArcDef {
            place: place.to_owned(),
            transition: self.def.name.clone(),
            direction,
            weight,
            inscription,
        });
        self
    }

    pub fn input(self, place: &str, pattern: Vec<Expr>) -> Self {
        self.arc(place, ArcDirection::Input, 1, pattern)
    }

    pub fn input_n(self, place: &str, weight: u32, pattern: Vec<Expr>) -> Self {
        self.arc(place, ArcDirection::Input, weight, pattern)
    }

    pub fn read(self, place: &str, pattern: Vec<Expr>) -> Self {
        self.arc(place, ArcDirection::Read, 1, pattern)
    }

    pub fn output(self, place: &str, exprs: Vec<Expr>) -> Self {
        self.arc(place, ArcDirection::Output, 1, exprs)
    }

    pub fn output_n(self, place: &str, weight: u32, exprs: Vec<Expr>) -> Self {
        self.arc(place, ArcDirection::Output, weight, exprs)
    }

    pub fn guard(mut self, g: Expr) -> Self {
        self.def.guard = Some(g);
        self
    }

    pub fn uplink(mut self, label: &str, args: Vec<Expr>) -> Self {
        self.def.uplink = Some(ChannelRef { label: label.to_owned(), args });
        self
    }

    pub fn downlink(mut self, net_var: &str, label: &str, args: Vec<Expr>) -> Self {
        self.def.downlink = Some(Downlink {
            net: net_var.to_owned(),
            channel: ChannelRef { label: label.to_owned(), args },
        });
        self
    }

    pub fn race(mut self, label: &str) -> Self {
        self.def.race = Some(label.to_owned());
        self
    }

    pub fn delay(mut self, d: DelayDistribution) -> Self {
        self.delay = Some(d);
        self
    }
}

// ---------------------------------------------------------------------------
// compiled form

#[derive(Clone, Debug)]
pub(crate) struct PreArc {
    pub place: usize,
    pub weight: u32,
    pub pattern: Vec<Expr>,
    pub consume: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct PostArc {
    pub place: usize,
    pub weight: u32,
    pub exprs: Vec<Expr>,
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledTransition {
    pub name: String,
    pub pre: Vec<PreArc>,
    pub post: Vec<PostArc>,
    pub guard: Option<Expr>,
    pub uplink: Option<ChannelRef>,
    pub downlink: Option<Downlink>,
    pub race: Option<String>,
    pub delay: DelayDistribution,
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledNet {
    pub def: NetDefinition,
    pub place_index: HashMap<String, usize>,
    pub transitions: Vec<CompiledTransition>,
    pub has_downlinks: bool,
}

impl CompiledNet {
    pub fn place_name(&self, idx: usize) -> &str {
        &self.def.places[idx].name
    }
}

fn dup<'a>(names: impl Iterator<Item = &'a str>) -> Option<String> {
    let mut seen = BTreeSet::new();
    names.into_iter().find(|n| !seen.insert(*n)).map(str::to_owned)
}

impl NetDefinition {
    /// Checks the structural invariants and returns the indexed form.
    pub(crate) fn compile(&self) -> Result<CompiledNet, StructuralError> {
        let net = &self.name;
        if let Some(p) = dup(self.places.iter().map(|p| p.name.as_str())) {
            return Err(StructuralError::DuplicatePlace { net: net.clone(), place: p });
        }
        if let Some(t) = dup(self.transitions.iter().map(|t| t.name.as_str())) {
            return Err(StructuralError::DuplicateTransition { net: net.clone(), transition: t });
        }
        if let Some(c) = dup(self.channels.iter().map(String::as_str)) {
            return Err(StructuralError::DuplicateChannel { net: net.clone(), channel: c });
        }
        let place_index: HashMap<String, usize> =
            self.places.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        let mut transitions: Vec<CompiledTransition> = self
            .transitions
            .iter()
            .map(|t| CompiledTransition {
                name: t.name.clone(),
                pre: Vec::new(),
                post: Vec::new(),
                guard: t.guard.clone(),
                uplink: t.uplink.clone(),
                downlink: t.downlink.clone(),
                race: t.race.clone(),
                delay: self.timing.get(&t.name).cloned().unwrap_or_default(),
            })
            .collect();

        for arc in &self.arcs {
            let Some(&place) = place_index.get(&arc.place) else {
                return Err(StructuralError::UnknownPlace {
                    net: net.clone(),
                    place: arc.place.clone(),
                    transition: arc.transition.clone(),
                });
            };
            let Some(t) = transitions.iter_mut().find(|t| t.name == arc.transition) else {
                return Err(StructuralError::UnknownTransition {
                    net: net.clone(),
                    transition: arc.transition.clone(),
                });
            };
            if arc.weight == 0 {
                return Err(StructuralError::ZeroWeight {
                    net: net.clone(),
                    place: arc.place.clone(),
                    transition: arc.transition.clone(),
                });
            }
            if self.places[place].kind == PlaceKind::Counter && !arc.inscription.is_empty() {
                return Err(StructuralError::BadInscription {
                    net: net.clone(),
                    transition: arc.transition.clone(),
                    reason: format!("counter place `{}` only takes black tokens", arc.place),
                });
            }
            match arc.direction {
                ArcDirection::Input | ArcDirection::Read => {
                    if !arc.inscription.iter().all(Expr::is_pattern_term) {
                        return Err(StructuralError::BadInscription {
                            net: net.clone(),
                            transition: arc.transition.clone(),
                            reason: format!("input pattern on `{}` must be variables or constants", arc.place),
                        });
                    }
                    t.pre.push(PreArc {
                        place,
                        weight: arc.weight,
                        pattern: arc.inscription.clone(),
                        consume: arc.direction == ArcDirection::Input,
                    });
                }
                ArcDirection::Output => {
                    if arc.inscription.iter().any(contains_any) {
                        return Err(StructuralError::BadInscription {
                            net: net.clone(),
                            transition: arc.transition.clone(),
                            reason: format!("wildcard in output to `{}`", arc.place),
                        });
                    }
                    t.post.push(PostArc { place, weight: arc.weight, exprs: arc.inscription.clone() });
                }
            }
        }

        for name in self.timing.keys() {
            if !transitions.iter().any(|t| &t.name == name) {
                return Err(StructuralError::UnknownTransition { net: net.clone(), transition: name.clone() });
            }
        }

        for t in &transitions {
            if let Err(reason) = t.delay.validate() {
                return Err(StructuralError::BadDelay { net: net.clone(), transition: t.name.clone(), reason });
            }
            for label in t.uplink.iter().chain(t.downlink.iter().map(|d| &d.channel)).map(|c| &c.label) {
                if !self.channels.contains(label) {
                    return Err(StructuralError::UndeclaredChannel {
                        net: net.clone(),
                        transition: t.name.clone(),
                        channel: label.clone(),
                    });
                }
            }
            if t.race.is_some() && (t.uplink.is_some() || t.downlink.is_some()) {
                return Err(StructuralError::BadInscription {
                    net: net.clone(),
                    transition: t.name.clone(),
                    reason: "racing transitions cannot carry channels".into(),
                });
            }
            if let Some(up) = &t.uplink {
                if !up.args.iter().all(Expr::is_pattern_term) || up.args.iter().any(|e| matches!(e, Expr::Any)) {
                    return Err(StructuralError::BadInscription {
                        net: net.clone(),
                        transition: t.name.clone(),
                        reason: "uplink arguments must be variables or constants".into(),
                    });
                }
            }

            // variables bound by the input side of the transition
            let mut bound: BTreeSet<String> = BTreeSet::new();
            for arc in &t.pre {
                for e in &arc.pattern {
                    if let Expr::Var(v) = e {
                        bound.insert(v.clone());
                    }
                }
            }
            if let Some(dl) = &t.downlink {
                if !bound.contains(&dl.net) {
                    return Err(StructuralError::UnboundVariable {
                        net: net.clone(),
                        transition: t.name.clone(),
                        variable: dl.net.clone(),
                    });
                }
            }
            // channel arguments that are bare variables may be bound by the partner
            let channel_args = t.uplink.iter().chain(t.downlink.iter().map(|d| &d.channel));
            for c in channel_args {
                for a in &c.args {
                    match a {
                        Expr::Var(v) => {
                            bound.insert(v.clone());
                        }
                        other => {
                            let mut vs = Vec::new();
                            other.vars(&mut vs);
                            if let Some(v) = vs.into_iter().find(|v| !bound.contains(v)) {
                                return Err(StructuralError::UnboundVariable {
                                    net: net.clone(),
                                    transition: t.name.clone(),
                                    variable: v,
                                });
                            }
                        }
                    }
                }
            }
            let mut used = Vec::new();
            if let Some(g) = &t.guard {
                g.vars(&mut used);
            }
            for arc in &t.post {
                for e in &arc.exprs {
                    e.vars(&mut used);
                }
            }
            if let Some(v) = used.into_iter().find(|v| !bound.contains(v)) {
                return Err(StructuralError::UnboundVariable {
                    net: net.clone(),
                    transition: t.name.clone(),
                    variable: v,
                });
            }
        }

        let has_downlinks = transitions.iter().any(|t| t.downlink.is_some());
        Ok(CompiledNet { def: self.clone(), place_index, transitions, has_downlinks })
    }
}

fn contains_any(e: &Expr) -> bool {
    match e {
        Expr::Any => true,
        Expr::Var(_) | Expr::Const(_) => false,
        Expr::Not(x) => contains_any(x),
        Expr::Bin(_, a, b) => contains_any(a) || contains_any(b),
    }
}
