//! Simulation state, future-event list and the run loop.
//!
//! Firing is split in two: input tokens are consumed when a transition
//! fires and output tokens are produced when its completion event is
//! processed. Transitions fire as soon as they are enabled, scanning
//! instances in id order and transitions in declaration order.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binding::{self, EnabledBinding, FiringPart};
use crate::dist::Delay;
use crate::error::{MarkingError, SimError};
use crate::expr::Env;
use crate::marking::NetInstance;
use crate::trace::{Phase, Trace, TraceEvent, TracePart};
use crate::value::{InstanceId, Token};

pub type SimRng = ChaCha8Rng;

pub const DEFAULT_MAX_EVENTS: u64 = 1_000_000;

/// Picks one binding among the enabled bindings of a transition.
pub trait BindingChooser: Send {
    fn choose(&mut self, candidates: &[EnabledBinding], rng: &mut SimRng) -> usize;
}

/// Computes a firing delay from the current state instead of the
/// transition's static distribution.
pub trait DelayHook: Send {
    fn delay(&mut self, ctx: &DelayContext<'_>, rng: &mut SimRng) -> Delay;
}

pub struct DelayContext<'a> {
    pub clock: f64,
    pub instance_id: InstanceId,
    /// Marking after the firing's inputs have been removed.
    pub instance: &'a NetInstance,
    pub transition: &'a str,
    pub binding: &'a Env,
    /// Earlier firings of the same transition in this instance that have not completed.
    pub in_flight: usize,
}

/// Collects instances before the simulation starts. Ids are handed out in
/// insertion order and fix the scan order.
#[derive(Clone, Default)]
pub struct Hierarchy {
    instances: Vec<NetInstance>,
}

impl Hierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, instance: NetInstance) -> InstanceId {
        self.instances.push(instance);
        InstanceId(self.instances.len() - 1)
    }

    pub fn get(&self, id: InstanceId) -> Option<&NetInstance> {
        self.instances.get(id.0)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get_mut(&mut self, id: InstanceId) -> Option<&mut NetInstance> {
        self.instances.get_mut(id.0)
    }

    pub fn into_state(self, seed: u64) -> Result<SimulationState, MarkingError> {
        let n = self.instances.len();
        for inst in &self.instances {
            for place in &inst.places {
                for (_, tok) in place {
                    if let Some(dead) = tok.nets().find(|id| id.0 >= n) {
                        return Err(MarkingError::DeadReference(dead));
                    }
                }
            }
        }
        Ok(SimulationState {
            clock: 0.0,
            dirty: vec![true; n],
            instances: self.instances,
            fel: BinaryHeap::new(),
            seq: 0,
            firing_seq: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace: Trace::default(),
            max_events: DEFAULT_MAX_EVENTS,
            events: 0,
            choosers: BTreeMap::new(),
            hooks: BTreeMap::new(),
            in_flight: BTreeMap::new(),
        })
    }
}

pub enum Stop<'a> {
    /// Run until nothing is enabled and the event list is empty.
    Quiescence,
    /// Process every event scheduled at or before the given time.
    AtTime(f64),
    /// Stop as soon as the predicate holds after an event.
    When(Box<dyn Fn(&SimulationState) -> bool + 'a>),
    /// Stop at whichever of the conditions triggers first.
    Any(Vec<Stop<'a>>),
}

impl Stop<'_> {
    fn horizon(&self) -> Option<f64> {
        match self {
            Stop::AtTime(t) => Some(*t),
            Stop::Any(all) => all.iter().filter_map(Stop::horizon).reduce(f64::min),
            _ => None,
        }
    }

    fn holds(&self, s: &SimulationState) -> bool {
        match self {
            Stop::When(p) => p(s),
            Stop::Any(all) => all.iter().any(|c| c.holds(s)),
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Quiescent,
    TimeReached,
    Predicate,
}

struct Completion {
    time: f64,
    seq: u64,
    firing: u64,
    parts: Vec<(InstanceId, usize, String, Vec<(usize, Token)>)>,
}

impl PartialEq for Completion {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Completion {}
impl PartialOrd for Completion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Completion {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

pub struct SimulationState {
    clock: f64,
    instances: Vec<NetInstance>,
    fel: BinaryHeap<Completion>,
    seq: u64,
    firing_seq: u64,
    rng: SimRng,
    trace: Trace,
    max_events: u64,
    events: u64,
    choosers: BTreeMap<(String, String), Box<dyn BindingChooser>>,
    hooks: BTreeMap<(String, String), Box<dyn DelayHook>>,
    in_flight: BTreeMap<(InstanceId, usize), usize>,
    dirty: Vec<bool>,
}

impl SimulationState {
    /// A state holding a single root instance.
    pub fn single(instance: NetInstance, seed: u64) -> Result<Self, MarkingError> {
        let mut h = Hierarchy::new();
        h.add(instance);
        h.into_state(seed)
    }

    pub fn set_max_events(&mut self, max: u64) {
        self.max_events = max;
    }

    pub fn max_events(&self) -> u64 {
        self.max_events
    }

    /// Registers a chooser for `transition` in every instance of net `net`.
    pub fn set_chooser(&mut self, net: &str, transition: &str, chooser: Box<dyn BindingChooser>) {
        self.choosers.insert((net.to_owned(), transition.to_owned()), chooser);
    }

    /// Registers a delay hook for `transition` in every instance of net `net`.
    pub fn set_delay_hook(&mut self, net: &str, transition: &str, hook: Box<dyn DelayHook>) {
        self.hooks.insert((net.to_owned(), transition.to_owned()), hook);
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn instance(&self, id: InstanceId) -> Option<&NetInstance> {
        self.instances.get(id.0)
    }

    pub fn instances(&self) -> &[NetInstance] {
        &self.instances
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Trace {
        std::mem::take(&mut self.trace)
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    pub fn pending_events(&self) -> usize {
        self.fel.len()
    }

    /// Earliest scheduled completion, if any.
    pub fn next_event_time(&self) -> Option<f64> {
        self.fel.peek().map(|c| c.time)
    }

    /// Completion time of a firing still in flight.
    pub fn completion_time(&self, firing: u64) -> Option<f64> {
        self.fel.iter().find(|c| c.firing == firing).map(|c| c.time)
    }

    /// Moves the completion of an in-flight firing to `time`, which must not
    /// lie in the past. Among equal times the moved event counts as the
    /// most recently inserted.
    pub fn reschedule(&mut self, firing: u64, time: f64) -> Result<(), SimError> {
        if !(time >= self.clock) {
            return Err(SimError::PastTime { time, clock: self.clock });
        }
        let mut events = std::mem::take(&mut self.fel).into_vec();
        let found = events.iter_mut().find(|c| c.firing == firing).map(|c| {
            c.time = time;
            c.seq = self.seq;
        });
        self.fel = events.into();
        match found {
            Some(()) => {
                self.seq += 1;
                Ok(())
            }
            None => Err(SimError::NoSuchFiring(firing)),
        }
    }

    fn bindings_of(&self, id: InstanceId, t: usize, limit: Option<usize>) -> Vec<EnabledBinding> {
        let lookup = |i: InstanceId| self.instances.get(i.0);
        binding::enumerate(&lookup, id, &self.instances[id.0], t, limit)
    }

    /// Every enabled (transition, binding) pair of an instance, including
    /// synchronized pairs with its children.
    pub fn enabled_bindings(&self, id: InstanceId) -> Vec<EnabledBinding> {
        let Some(inst) = self.instances.get(id.0) else {
            return Vec::new();
        };
        (0..inst.net.transitions.len()).flat_map(|t| self.bindings_of(id, t, None)).collect()
    }

    /// Fires an enabled binding at the current clock.
    pub fn fire(&mut self, b: &EnabledBinding) -> Result<(), SimError> {
        let id = b.main.instance;
        if id.0 >= self.instances.len() {
            return Err(SimError::UnknownInstance(id));
        }
        if !self.bindings_of(id, b.main.transition, None).contains(b) {
            return Err(SimError::NotEnabled(b.main.transition_name.clone()));
        }
        self.do_fire(b, None)
    }

    fn sample_part(&mut self, part: &FiringPart) -> Delay {
        let inst = &self.instances[part.instance.0];
        let tr = &inst.net.transitions[part.transition];
        let key = (inst.net.def.name.clone(), tr.name.clone());
        if let Some(hook) = self.hooks.get_mut(&key) {
            let ctx = DelayContext {
                clock: self.clock,
                instance_id: part.instance,
                instance: inst,
                transition: &tr.name,
                binding: &part.env,
                in_flight: self.in_flight.get(&(part.instance, part.transition)).copied().unwrap_or(0),
            };
            hook.delay(&ctx, &mut self.rng)
        } else {
            tr.delay.sample(&mut self.rng)
        }
    }

    fn mark_dirty(&mut self, id: InstanceId) {
        self.dirty[id.0] = true;
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.net.has_downlinks {
                self.dirty[i] = true;
            }
        }
    }

    fn charge_event(&mut self) -> Result<(), SimError> {
        if self.events >= self.max_events {
            return Err(SimError::BudgetExceeded(self.max_events));
        }
        self.events += 1;
        Ok(())
    }

    fn do_fire(&mut self, b: &EnabledBinding, delay: Option<Delay>) -> Result<(), SimError> {
        self.charge_event()?;
        // outputs are fixed by the binding, so evaluate them up front
        let mut outputs = Vec::new();
        for part in b.parts() {
            let inst = &self.instances[part.instance.0];
            let tr = &inst.net.transitions[part.transition];
            let mut produced = Vec::new();
            for arc in &tr.post {
                let tok = arc
                    .exprs
                    .iter()
                    .map(|e| e.eval(&part.env))
                    .collect::<Result<Vec<_>, _>>()
                    .map(Token)
                    .map_err(|source| SimError::Eval { transition: tr.name.clone(), source })?;
                let place = &inst.net.def.places[arc.place];
                if !place.kind.admits(&tok) {
                    return Err(MarkingError::WrongKind { place: place.name.clone(), token: tok.to_string() }.into());
                }
                for _ in 0..arc.weight {
                    produced.push((arc.place, tok.clone()));
                }
            }
            outputs.push((part.instance, part.transition, part.transition_name.clone(), produced));
        }

        let mut trace_parts = Vec::new();
        for part in b.parts() {
            let inst = &mut self.instances[part.instance.0];
            let mut tokens = Vec::new();
            for &(place, tid) in &part.consumed {
                let tok = inst.remove(place, tid).ok_or_else(|| SimError::NotEnabled(part.transition_name.clone()))?;
                tokens.push((inst.net.place_name(place).to_owned(), tok));
            }
            trace_parts.push(TracePart {
                instance: part.instance,
                transition: part.transition_name.clone(),
                tokens,
            });
        }

        let delay = match delay {
            Some(d) => d,
            None => {
                let mut d = Delay::After(0.0);
                for part in b.parts() {
                    d = d.max(self.sample_part(part));
                }
                d
            }
        };

        for part in b.parts() {
            *self.in_flight.entry((part.instance, part.transition)).or_default() += 1;
            self.mark_dirty(part.instance);
        }
        let firing = self.firing_seq;
        self.firing_seq += 1;
        self.trace.events.push(TraceEvent { time: self.clock, firing, phase: Phase::Consume, parts: trace_parts });

        if let Delay::After(d) = delay {
            let seq = self.seq;
            self.seq += 1;
            self.fel.push(Completion { time: self.clock + d, seq, firing, parts: outputs });
        }
        Ok(())
    }

    fn complete(&mut self, c: Completion) -> Result<(), SimError> {
        self.charge_event()?;
        debug_assert!(c.time >= self.clock);
        self.clock = c.time;
        let mut trace_parts = Vec::new();
        for (id, t, name, produced) in c.parts {
            let inst = &mut self.instances[id.0];
            let mut tokens = Vec::new();
            for (place, tok) in produced {
                tokens.push((inst.net.place_name(place).to_owned(), tok.clone()));
                inst.insert(place, tok)?;
            }
            if let Some(n) = self.in_flight.get_mut(&(id, t)) {
                *n -= 1;
            }
            self.mark_dirty(id);
            trace_parts.push(TracePart { instance: id, transition: name, tokens });
        }
        self.trace.events.push(TraceEvent {
            time: self.clock,
            firing: c.firing,
            phase: Phase::Produce,
            parts: trace_parts,
        });
        Ok(())
    }

    /// Finds the next firing by priority: instance id, then transition
    /// declaration order, then token order. Returns the binding and a
    /// pre-sampled delay when a race decided it.
    fn next_firing(&mut self) -> Option<(EnabledBinding, Option<Delay>)> {
        for i in 0..self.instances.len() {
            if !self.dirty[i] {
                continue;
            }
            let id = InstanceId(i);
            let n_trans = self.instances[i].net.transitions.len();
            for t in 0..n_trans {
                let (net_name, tr_name, race) = {
                    let tr = &self.instances[i].net.transitions[t];
                    (self.instances[i].net.def.name.clone(), tr.name.clone(), tr.race.clone())
                };
                let key = (net_name, tr_name);
                if self.choosers.contains_key(&key) {
                    let all = self.bindings_of(id, t, None);
                    if all.is_empty() {
                        continue;
                    }
                    let chooser = self.choosers.get_mut(&key).expect("checked above");
                    let pick = chooser.choose(&all, &mut self.rng).min(all.len() - 1);
                    return Some((all[pick].clone(), None));
                }
                let Some(first) = self.bindings_of(id, t, Some(1)).into_iter().next() else {
                    continue;
                };
                let Some(label) = race else {
                    return Some((first, None));
                };
                // race: every enabled member samples, the earliest wins
                let mut best: Option<(EnabledBinding, Delay)> = None;
                for u in t..n_trans {
                    if self.instances[i].net.transitions[u].race.as_deref() != Some(label.as_str()) {
                        continue;
                    }
                    let cand = if u == t { Some(first.clone()) } else { self.bindings_of(id, u, Some(1)).into_iter().next() };
                    let Some(cand) = cand else { continue };
                    let d = self.sample_part(&cand.main);
                    if best.as_ref().is_none_or(|(_, bd)| d.key() < bd.key()) {
                        best = Some((cand, d));
                    }
                }
                let (b, d) = best.expect("the first member is enabled");
                return Some((b, Some(d)));
            }
            self.dirty[i] = false;
        }
        None
    }

    /// Runs until the stop condition holds or nothing remains to do.
    pub fn run(&mut self, stop: Stop<'_>) -> Result<StopReason, SimError> {
        let horizon = stop.horizon();
        loop {
            while let Some((b, d)) = self.next_firing() {
                self.do_fire(&b, d)?;
                if stop.holds(self) {
                    return Ok(StopReason::Predicate);
                }
            }
            let Some(next) = self.fel.peek() else {
                return Ok(StopReason::Quiescent);
            };
            if let Some(t) = horizon {
                if next.time > t {
                    self.clock = self.clock.max(t);
                    return Ok(StopReason::TimeReached);
                }
            }
            let c = self.fel.pop().expect("peeked");
            self.complete(c)?;
            if stop.holds(self) {
                return Ok(StopReason::Predicate);
            }
        }
    }

    /// Convenience: run to quiescence and hand back the trace.
    pub fn run_to_end(&mut self) -> Result<&Trace, SimError> {
        self.run(Stop::Quiescence)?;
        Ok(&self.trace)
    }
}
