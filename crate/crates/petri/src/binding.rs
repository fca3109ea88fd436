//! The enabling rule.
//!
//! Input and read arcs are matched in declaration order; within a place,
//! tokens are tried in insertion order, skipping tokens whose value was
//! already tried at the same arc. A transition with a downlink is enabled
//! only together with a matching uplink binding in the referenced child.

use crate::expr::{Env, Expr};
use crate::marking::{NetInstance, TokenId};
use crate::net::{ChannelRef, CompiledTransition, PreArc};
use crate::value::{InstanceId, Token};

/// The share of a firing that happens in one net instance.
#[derive(Clone, Debug, PartialEq)]
pub struct FiringPart {
    pub(crate) instance: InstanceId,
    pub(crate) transition: usize,
    pub(crate) transition_name: String,
    pub(crate) env: Env,
    pub(crate) consumed: Vec<(usize, TokenId)>,
}

impl FiringPart {
    pub fn instance(&self) -> InstanceId {
        self.instance
    }

    pub fn transition(&self) -> &str {
        &self.transition_name
    }

    pub fn binding(&self) -> &Env {
        &self.env
    }
}

/// A transition together with a variable binding (and, for synchronized
/// transitions, the partner binding in the child net).
#[derive(Clone, Debug, PartialEq)]
pub struct EnabledBinding {
    pub(crate) main: FiringPart,
    pub(crate) sync: Option<FiringPart>,
}

impl EnabledBinding {
    pub fn instance(&self) -> InstanceId {
        self.main.instance
    }

    pub fn transition(&self) -> &str {
        &self.main.transition_name
    }

    pub fn binding(&self) -> &Env {
        &self.main.env
    }

    pub fn get(&self, var: &str) -> Option<&crate::Value> {
        self.main.env.get(var)
    }

    /// Child side of a channel synchronization.
    pub fn partner(&self) -> Option<&FiringPart> {
        self.sync.as_ref()
    }

    pub(crate) fn parts(&self) -> impl Iterator<Item = &FiringPart> {
        std::iter::once(&self.main).chain(self.sync.iter())
    }
}

fn match_pattern(pattern: &[Expr], token: &Token, env: &mut Env) -> bool {
    if pattern.len() != token.0.len() {
        return false;
    }
    for (p, v) in pattern.iter().zip(&token.0) {
        match p {
            Expr::Any => {}
            Expr::Const(c) => {
                if c != v {
                    return false;
                }
            }
            Expr::Var(name) => match env.get(name) {
                Some(bound) if bound != v => return false,
                Some(_) => {}
                None => {
                    env.insert(name.clone(), v.clone());
                }
            },
            _ => return false,
        }
    }
    true
}

/// Walks all consistent assignments of tokens to `arcs[k..]`. The callback
/// returns `false` to stop the walk; the function then returns `false` too.
fn walk(
    inst: &NetInstance,
    arcs: &[PreArc],
    k: usize,
    env: &Env,
    reserved: &mut Vec<(usize, TokenId)>,
    f: &mut dyn FnMut(&Env, &[(usize, TokenId)]) -> bool,
) -> bool {
    let Some(arc) = arcs.get(k) else {
        return f(env, reserved);
    };
    let tokens = &inst.places[arc.place];
    let mut tried: Vec<&Token> = Vec::new();
    for (j, (tid, tok)) in tokens.iter().enumerate() {
        if reserved.contains(&(arc.place, *tid)) || tried.contains(&tok) {
            continue;
        }
        tried.push(tok);
        let mut env2 = env.clone();
        if !match_pattern(&arc.pattern, tok, &mut env2) {
            continue;
        }
        let mut picked = vec![*tid];
        for (tid2, tok2) in tokens.iter().skip(j + 1) {
            if picked.len() as u32 >= arc.weight {
                break;
            }
            if reserved.contains(&(arc.place, *tid2)) {
                continue;
            }
            if match_pattern(&arc.pattern, tok2, &mut env2.clone()) {
                picked.push(*tid2);
            }
        }
        if (picked.len() as u32) < arc.weight {
            continue;
        }
        let mark = reserved.len();
        if arc.consume {
            reserved.extend(picked.into_iter().map(|t| (arc.place, t)));
        }
        let go_on = walk(inst, arcs, k + 1, &env2, reserved, f);
        reserved.truncate(mark);
        if !go_on {
            return false;
        }
    }
    true
}

fn eval_opt(e: &Expr, env: &Env) -> Option<crate::Value> {
    e.eval(env).ok()
}

/// Unifies downlink arguments with uplink arguments, extending both envs.
fn unify(down: &ChannelRef, penv: &mut Env, up: &ChannelRef, cenv: &mut Env) -> bool {
    if down.args.len() != up.args.len() {
        return false;
    }
    for (pa, ca) in down.args.iter().zip(&up.args) {
        match (eval_opt(pa, penv), eval_opt(ca, cenv)) {
            (Some(a), Some(b)) => {
                if a != b {
                    return false;
                }
            }
            (None, Some(b)) => match pa {
                Expr::Var(v) => {
                    penv.insert(v.clone(), b);
                }
                _ => return false,
            },
            (Some(a), None) => match ca {
                Expr::Var(v) => {
                    cenv.insert(v.clone(), a);
                }
                _ => return false,
            },
            (None, None) => return false,
        }
    }
    true
}

fn guard_ok(t: &CompiledTransition, env: &Env) -> bool {
    t.guard.as_ref().is_none_or(|g| g.holds(env))
}

/// Enabled bindings of transition `t` of instance `id`, in deterministic
/// order, stopping after `limit` results when given.
pub(crate) fn enumerate<'a>(
    lookup: &dyn Fn(InstanceId) -> Option<&'a NetInstance>,
    id: InstanceId,
    inst: &NetInstance,
    t: usize,
    limit: Option<usize>,
) -> Vec<EnabledBinding> {
    let tr = &inst.net.transitions[t];
    let mut out = Vec::new();
    if tr.uplink.is_some() {
        // only fires when called by a parent
        return out;
    }
    let full = |out: &Vec<EnabledBinding>| limit.is_some_and(|l| out.len() >= l);
    let mut reserved = Vec::new();
    walk(inst, &tr.pre, 0, &Env::new(), &mut reserved, &mut |env, consumed| {
        let part = |env: Env| FiringPart {
            instance: id,
            transition: t,
            transition_name: tr.name.clone(),
            env,
            consumed: consumed.to_vec(),
        };
        let Some(dl) = &tr.downlink else {
            if guard_ok(tr, env) {
                out.push(EnabledBinding { main: part(env.clone()), sync: None });
            }
            return !full(&out);
        };
        let Some(child_id) = env.get(&dl.net).and_then(crate::Value::as_net) else {
            return true;
        };
        let Some(child) = lookup(child_id) else {
            return true;
        };
        for (ct_idx, ct) in child.net.transitions.iter().enumerate() {
            let Some(up) = &ct.uplink else { continue };
            if up.label != dl.channel.label || ct.downlink.is_some() {
                continue;
            }
            let mut creserved = Vec::new();
            let keep_going = walk(child, &ct.pre, 0, &Env::new(), &mut creserved, &mut |cenv, cconsumed| {
                let mut penv = env.clone();
                let mut cenv = cenv.clone();
                if !unify(&dl.channel, &mut penv, up, &mut cenv) {
                    return true;
                }
                if !guard_ok(tr, &penv) || !guard_ok(ct, &cenv) {
                    return true;
                }
                out.push(EnabledBinding {
                    main: part(penv),
                    sync: Some(FiringPart {
                        instance: child_id,
                        transition: ct_idx,
                        transition_name: ct.name.clone(),
                        env: cenv,
                        consumed: cconsumed.to_vec(),
                    }),
                });
                !full(&out)
            });
            if !keep_going {
                return false;
            }
        }
        !full(&out)
    });
    out
}
