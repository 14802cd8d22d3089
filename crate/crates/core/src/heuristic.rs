//! The belief heuristics the solver can be initialized with.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use crate::engine::Engine;
use crate::mdp::{MdpConfig, MdpValueTable};
use crate::model::BeliefState;
use crate::relax::{Relaxation, RelaxedKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeuristicKind {
    Flat,
    Ml,
    Qmdp,
    HmaxS,
    HaddS,
    HffS,
    HmaxB,
    HaddB,
    HffB,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 9] = [
        HeuristicKind::Flat,
        HeuristicKind::Ml,
        HeuristicKind::Qmdp,
        HeuristicKind::HmaxS,
        HeuristicKind::HaddS,
        HeuristicKind::HffS,
        HeuristicKind::HmaxB,
        HeuristicKind::HaddB,
        HeuristicKind::HffB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Flat => "flat",
            HeuristicKind::Ml => "ml",
            HeuristicKind::Qmdp => "qmdp",
            HeuristicKind::HmaxS => "hmax-s",
            HeuristicKind::HaddS => "hadd-s",
            HeuristicKind::HffS => "hff-s",
            HeuristicKind::HmaxB => "hmax-b",
            HeuristicKind::HaddB => "hadd-b",
            HeuristicKind::HffB => "hff-b",
        }
    }

    /// The heuristics intended as lower bounds. hmax-b can still exceed
    /// the optimum when the most likely state lies on the costlier branch
    /// (see `belief_hmax_exceeds_the_optimum_on_trap`).
    pub fn is_admissible(self) -> bool {
        matches!(
            self,
            HeuristicKind::Flat | HeuristicKind::Qmdp | HeuristicKind::HmaxS | HeuristicKind::HmaxB
        )
    }

    pub fn uses_mdp(self) -> bool {
        matches!(self, HeuristicKind::Ml | HeuristicKind::Qmdp)
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown heuristic `{0}` (expected one of flat, ml, qmdp, hmax-s, hadd-s, hff-s, hmax-b, hadd-b, hff-b)")]
pub struct UnknownHeuristic(pub String);

impl FromStr for HeuristicKind {
    type Err = UnknownHeuristic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HeuristicKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownHeuristic(s.to_string()))
    }
}

enum Backend {
    Flat,
    Mdp(MdpValueTable),
    Relaxed(Relaxation),
}

/// A heuristic bound to one problem. Goal beliefs always get 0.
pub struct Heuristic {
    kind: HeuristicKind,
    engine: Arc<Engine>,
    backend: Backend,
}

impl Heuristic {
    /// Builds the heuristic; MDP-based kinds run their initial RTDP phase
    /// here, seeded with `seed`.
    pub fn new(kind: HeuristicKind, engine: Arc<Engine>, seed: u64, mdp: MdpConfig) -> Self {
        let backend = match kind {
            HeuristicKind::Flat => Backend::Flat,
            HeuristicKind::Ml | HeuristicKind::Qmdp => {
                let b0 = engine
                    .problem()
                    .initial_belief()
                    .expect("validated problem has an initial belief");
                Backend::Mdp(MdpValueTable::initialized(engine.clone(), &b0, seed, mdp))
            }
            _ => Backend::Relaxed(Relaxation::new(engine.shared_problem().clone())),
        };
        Heuristic {
            kind,
            engine,
            backend,
        }
    }

    pub fn kind(&self) -> HeuristicKind {
        self.kind
    }

    /// Time spent in the initial MDP phase (zero for other kinds).
    pub fn init_time(&self) -> Duration {
        match &self.backend {
            Backend::Mdp(t) => t.init_time(),
            _ => Duration::ZERO,
        }
    }

    pub fn relaxation(&self) -> Option<&Relaxation> {
        match &self.backend {
            Backend::Relaxed(r) => Some(r),
            _ => None,
        }
    }

    pub fn mdp(&self) -> Option<&MdpValueTable> {
        match &self.backend {
            Backend::Mdp(t) => Some(t),
            _ => None,
        }
    }

    pub fn value(&self, b: &BeliefState) -> f64 {
        if self.engine.belief_is_goal(b) {
            return 0.0;
        }
        match (&self.backend, self.kind) {
            (Backend::Flat, _) => 1.0,
            (Backend::Mdp(t), HeuristicKind::Ml) => t.most_likely(b),
            (Backend::Mdp(t), _) => t.qmdp(b),
            (Backend::Relaxed(r), k) => match k {
                HeuristicKind::HmaxS => r.weighted(b, RelaxedKind::Max),
                HeuristicKind::HaddS => r.weighted(b, RelaxedKind::Add),
                HeuristicKind::HffS => r.weighted(b, RelaxedKind::Ff),
                HeuristicKind::HmaxB => r.belief_value(b, RelaxedKind::Max).to_f64(),
                HeuristicKind::HaddB => r.belief_value(b, RelaxedKind::Add).to_f64(),
                HeuristicKind::HffB => r.belief_value(b, RelaxedKind::Ff).to_f64(),
                _ => unreachable!("relaxed backend for {k}"),
            },
        }
    }
}
