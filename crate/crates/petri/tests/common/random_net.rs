//! Random small nets and the invariant checks run against them.

use std::collections::BTreeMap;

use podnet_petri::expr::{le, val, var};
use podnet_petri::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct RandomNet {
    pub def: NetDefinition,
    pub initial: Marking,
}

fn random_delay(rng: &mut ChaCha8Rng) -> DelayDistribution {
    match rng.random_range(0..10) {
        0..=2 => DelayDistribution::constant(0.0),
        3..=5 => DelayDistribution::constant(rng.random_range(1..=4) as f64 * 0.5),
        6 => DelayDistribution::exponential(rng.random_range(0.5..2.0)),
        7 => DelayDistribution::normal(1.0, 0.5),
        8 => DelayDistribution::empirical(vec![0.25, 1.0, 2.5]),
        _ => DelayDistribution::Never,
    }
}

/// At most 6 places and 6 transitions. Places are either counters or
/// single-field integer tuples.
pub fn random_net(seed: u64) -> RandomNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_places = rng.random_range(1..=6);
    let n_trans = rng.random_range(0..=6);
    let kinds: Vec<PlaceKind> = (0..n_places)
        .map(|_| if rng.random_bool(0.5) { PlaceKind::Counter } else { PlaceKind::Tuple })
        .collect();

    let mut b = NetBuilder::new(&format!("random{seed}"));
    for (i, k) in kinds.iter().enumerate() {
        b = b.place(&format!("P{i}"), *k);
    }
    for t in 0..n_trans {
        let mut tb = TransitionBuilder::new(&format!("T{t}"));
        let mut bound: Vec<String> = Vec::new();
        let n_in = rng.random_range(1..=2.min(n_places));
        let mut used = Vec::new();
        while used.len() < n_in {
            let p = rng.random_range(0..n_places);
            if !used.contains(&p) {
                used.push(p);
            }
        }
        for (k, &p) in used.iter().enumerate() {
            let name = format!("P{p}");
            let pattern = match kinds[p] {
                PlaceKind::Counter => vec![],
                _ => match rng.random_range(0..3) {
                    0 => vec![val(rng.random_range(0..3i64))],
                    1 => vec![podnet_petri::expr::any()],
                    _ => {
                        let v = format!("x{k}");
                        bound.push(v.clone());
                        vec![var(&v)]
                    }
                },
            };
            // first arc always consumes so that an immediate transition cannot spin forever on reads alone
            if k > 0 && rng.random_bool(0.3) {
                tb = tb.read(&name, pattern);
            } else {
                tb = tb.input_n(&name, rng.random_range(1..=2), pattern);
            }
        }
        if let Some(v) = bound.first() {
            if rng.random_bool(0.4) {
                tb = tb.guard(le(var(v), 3));
            }
        }
        for _ in 0..rng.random_range(0..=2) {
            let p = rng.random_range(0..n_places);
            let exprs = match kinds[p] {
                PlaceKind::Counter => vec![],
                _ => match bound.first() {
                    Some(v) if rng.random_bool(0.5) => vec![var(v) + 1],
                    _ => vec![val(rng.random_range(0..3i64))],
                },
            };
            tb = tb.output_n(&format!("P{p}"), rng.random_range(1..=2), exprs);
        }
        b = b.transition(tb.delay(random_delay(&mut rng)));
    }

    let mut initial = Marking::new();
    for (i, k) in kinds.iter().enumerate() {
        for _ in 0..rng.random_range(0..=3) {
            let tok = match k {
                PlaceKind::Counter => Token::black(),
                _ => token![rng.random_range(0..3i64)],
            };
            initial.add(&format!("P{i}"), tok);
        }
    }
    RandomNet { def: b.build(), initial }
}

pub const HORIZON: f64 = 25.0;
pub const BUDGET: u64 = 2_000;

/// Runs the net to the horizon or the event budget, whichever comes first.
pub fn run(net: &RandomNet, seed: u64) -> SimulationState {
    let inst = build_net(&net.def, &net.initial).expect("generated nets are well formed");
    let mut sim = SimulationState::single(inst, seed).expect("no net references");
    sim.set_max_events(BUDGET);
    match sim.run(Stop::AtTime(HORIZON)) {
        Ok(_) | Err(SimError::BudgetExceeded(_)) => {}
        Err(e) => panic!("unexpected simulation error: {e}"),
    }
    sim
}

fn arc_weights(def: &NetDefinition, transition: &str, dir: ArcDirection) -> BTreeMap<String, usize> {
    let mut w = BTreeMap::new();
    for a in def.arcs.iter().filter(|a| a.transition == transition && a.direction == dir) {
        *w.entry(a.place.clone()).or_default() += a.weight as usize;
    }
    w
}

fn counts(tokens: &[(String, Token)]) -> BTreeMap<String, usize> {
    let mut c = BTreeMap::new();
    for (p, _) in tokens {
        *c.entry(p.clone()).or_default() += 1;
    }
    c
}

/// Each firing moves exactly the arc weights, and replaying the trace on
/// the initial marking yields the final marking.
pub fn check_conservation(net: &RandomNet, sim: &SimulationState) -> Result<(), String> {
    let mut replay: BTreeMap<String, Vec<Token>> = BTreeMap::new();
    for (p, toks) in net.initial.iter() {
        replay.insert(p.to_owned(), toks.to_vec());
    }
    for e in sim.trace().iter() {
        for part in &e.parts {
            let dir = match e.phase {
                Phase::Consume => ArcDirection::Input,
                Phase::Produce => ArcDirection::Output,
            };
            let expected = arc_weights(&net.def, &part.transition, dir);
            if counts(&part.tokens) != expected {
                return Err(format!(
                    "{} {:?} at {} moved {:?}, arcs say {:?}",
                    part.transition,
                    e.phase,
                    e.time,
                    counts(&part.tokens),
                    expected
                ));
            }
            for (place, tok) in &part.tokens {
                let bag = replay.entry(place.clone()).or_default();
                match e.phase {
                    Phase::Consume => {
                        let pos = bag
                            .iter()
                            .position(|t| t == tok)
                            .ok_or_else(|| format!("{} consumed {tok} absent from {place}", part.transition))?;
                        bag.remove(pos);
                    }
                    Phase::Produce => bag.push(tok.clone()),
                }
            }
        }
    }
    let actual = sim.instance(InstanceId(0)).expect("root").marking();
    for p in &net.def.places {
        let mut want = replay.get(&p.name).cloned().unwrap_or_default();
        let mut got = actual.tokens(&p.name).to_vec();
        want.sort();
        got.sort();
        if want != got {
            return Err(format!("place {}: replay {:?} vs marking {:?}", p.name, want, got));
        }
    }
    Ok(())
}

pub fn check_monotone(sim: &SimulationState) -> Result<(), String> {
    let times: Vec<f64> = sim.trace().iter().map(|e| e.time).collect();
    match times.windows(2).find(|w| w[1] < w[0]) {
        Some(w) => Err(format!("clock went back from {} to {}", w[0], w[1])),
        None => Ok(()),
    }
}

pub fn check_deterministic(net: &RandomNet, seed: u64) -> Result<(), String> {
    let a = run(net, seed).trace().to_ndjson();
    let b = run(net, seed).trace().to_ndjson();
    if a == b {
        Ok(())
    } else {
        Err("two runs with the same seed diverged".into())
    }
}

pub fn check_all(seed: u64) -> Result<(), String> {
    let net = random_net(seed);
    let sim = run(&net, seed);
    check_conservation(&net, &sim)?;
    check_monotone(&sim)?;
    check_deterministic(&net, seed)
}
