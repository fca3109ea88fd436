//! Deterministic discrete-event engine for hierarchical timed Petri nets.
//!
//! Tokens are tuples of values; a value may be a handle to another net
//! instance, which gives the "nets within nets" structure: a parent
//! transition with a downlink `x:label(args)` fires atomically with a
//! child transition carrying the uplink `:label(args)` in the instance
//! bound to `x`.
//!
//! Timing follows consume-at-fire / produce-at-completion: when a
//! transition fires its inputs leave the marking immediately and its
//! outputs appear once the sampled delay has elapsed. Conflicts between
//! simultaneously enabled transitions are resolved by instance id, then
//! declaration order, then token insertion order, so a run is a pure
//! function of the nets, the initial marking and the seed.
//!
//! ```
//! use podnet_petri::*;
//!
//! let def = NetBuilder::new("toy")
//!     .place("A", PlaceKind::Counter)
//!     .place("B", PlaceKind::Counter)
//!     .transition(
//!         TransitionBuilder::new("move")
//!             .input("A", vec![])
//!             .output("B", vec![])
//!             .delay(DelayDistribution::constant(1.5)),
//!     )
//!     .build();
//! let inst = build_net(&def, &Marking::new().with_n("A", 2, token![])).unwrap();
//! let mut sim = SimulationState::single(inst, 42).unwrap();
//! sim.run(Stop::Quiescence).unwrap();
//! assert_eq!(sim.clock(), 1.5);
//! assert_eq!(sim.instance(InstanceId(0)).unwrap().count("B"), 2);
//! ```

mod binding;
mod dist;
mod error;
pub mod expr;
mod marking;
mod net;
mod sim;
mod trace;
mod value;

pub use binding::{EnabledBinding, FiringPart};
pub use dist::{Delay, DelayDistribution};
pub use error::{MarkingError, NetError, SimError, StructuralError};
pub use expr::{Env, EvalError, Expr};
pub use marking::{build_net, Marking, Net, NetInstance, TokenId};
pub use net::{
    ArcDef, ArcDirection, ChannelRef, Downlink, NetBuilder, NetDefinition, PlaceDef, PlaceKind, TransitionBuilder,
    TransitionDef,
};
pub use sim::{
    BindingChooser, DelayContext, DelayHook, Hierarchy, SimRng, SimulationState, Stop, StopReason, DEFAULT_MAX_EVENTS,
};
pub use trace::{Phase, Trace, TraceEvent, TracePart};
pub use value::{InstanceId, Token, Value};
