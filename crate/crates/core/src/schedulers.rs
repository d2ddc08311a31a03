//! Shipped scheduling policies.
//!
//! * [`HPolicy`]: the golden-ratio eventually-committing scheduler. A standby
//!   task goes to a fresh slow machine as soon as `s_i + t <= φ·C^t`; the fast
//!   machine, when free, takes the largest standby task (largest `s_i + t_i`)
//!   but only once it is eligible, `t >= f_i/φ`.
//! * [`HPolicy::without_eligibility`]: the same rules with the eligibility
//!   clause removed, so it never idles the fast machine while work waits.
//! * [`KeepFast`], [`BailToSlow`]: never-committing baselines used against the
//!   lower-bound adversary.
//!
//! Ties in largeness are broken eligible-first, then by lowest task id.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::engine::{Command, CommitmentModel, EngineState, SchedulerPolicy, Wakeups};
use crate::scalar::Scalar;

/// Standby tasks ordered by decreasing largeness, ties by increasing id.
fn by_largeness<N: Scalar>(state: &EngineState<N>) -> Vec<(usize, N)> {
    let mut tasks: Vec<(usize, N)> = state.standby().iter().map(|&id| (id, state.task(id).largeness())).collect();
    // insertion sort: the comparator may be a tolerance compare in float mode
    for i in 1..tasks.len() {
        let mut j = i;
        while j > 0 && tasks[j].1.compare(&tasks[j - 1].1) == Ordering::Greater {
            tasks.swap(j, j - 1);
            j -= 1;
        }
    }
    tasks
}

/// The largeness-maximal standby tasks, by increasing id.
fn largest_set<N: Scalar>(state: &EngineState<N>) -> Vec<usize> {
    let ordered = by_largeness(state);
    match ordered.first() {
        None => Vec::new(),
        Some((_, top)) => {
            let top = top.clone();
            ordered.into_iter().take_while(|(_, l)| l.same(&top)).map(|(id, _)| id).collect()
        }
    }
}

/// Golden-ratio eventually-committing scheduler, optionally without the
/// eligibility delay.
#[derive(Debug, Clone)]
pub struct HPolicy<N> {
    eligibility: bool,
    phi: N,
    /// `C^t` cached at the last arrival, with the arrival count it belongs to.
    cached: Option<(usize, N)>,
}

impl<N: Scalar> HPolicy<N> {
    pub fn new() -> Self {
        HPolicy { eligibility: true, phi: N::phi(), cached: None }
    }

    pub fn without_eligibility() -> Self {
        HPolicy { eligibility: false, ..Self::new() }
    }

    pub fn uses_eligibility(&self) -> bool {
        self.eligibility
    }

    /// `C^t` as seen at the most recent invocation.
    pub fn cached_completion(&self) -> Option<&N> {
        self.cached.as_ref().map(|(_, c)| c)
    }

    fn completion(&mut self, state: &EngineState<N>) -> N {
        match &self.cached {
            Some((count, c)) if *count == state.arrived_count() => c.clone(),
            _ => {
                let c = state.prefix_opt().completion.clone();
                self.cached = Some((state.arrived_count(), c.clone()));
                c
            }
        }
    }

    fn eligible(&self, now: &N, f: &N) -> bool {
        now.times(&self.phi).ge(f)
    }

    /// One decision step of the scheduler.
    pub fn h_decide(&mut self, state: &EngineState<N>, wakeups: &mut Wakeups<N>) -> Command {
        let now = state.now().clone();
        let completion = self.completion(state);
        let bound = self.phi.times(&completion);

        // slow-check, scanned in decreasing largeness
        let ordered = by_largeness(state);
        if let Some((id, _)) = ordered.iter().find(|(id, _)| state.task(*id).s.plus(&now).le(&bound)) {
            return Command::StartSlow(*id);
        }

        // fast-check
        if !state.fast_free() {
            return Command::Noop;
        }
        let top = largest_set(state);
        if !self.eligibility {
            return top.first().map_or(Command::Noop, |&id| Command::StartFast(id));
        }
        if let Some(&id) = top.iter().find(|&&id| self.eligible(&now, &state.task(id).f)) {
            return Command::StartFast(id);
        }
        if let Some(earliest) = top.iter().map(|&id| state.task(id).f.over(&self.phi)).reduce(|a, b| a.min_of(&b)) {
            wakeups.request(earliest);
        }
        Command::Noop
    }
}

impl<N: Scalar> Default for HPolicy<N> {
    fn default() -> Self {
        Self::new()
    }
}

impl<N: Scalar> SchedulerPolicy<N> for HPolicy<N> {
    fn name(&self) -> &str {
        if self.eligibility {
            "h"
        } else {
            "h-noelig"
        }
    }

    fn model(&self) -> CommitmentModel {
        CommitmentModel::Eventual
    }

    fn decide(&mut self, state: &EngineState<N>, wakeups: &mut Wakeups<N>) -> Command {
        self.h_decide(state, wakeups)
    }
}

/// Never-committing baseline: the fast machine always takes the largest standby
/// task; slow machines are never used.
#[derive(Debug, Clone, Default)]
pub struct KeepFast;

impl KeepFast {
    pub fn keep_fast_decide<N: Scalar>(&self, state: &EngineState<N>) -> Command {
        if !state.fast_free() {
            return Command::Noop;
        }
        largest_set(state).first().map_or(Command::Noop, |&id| Command::StartFast(id))
    }
}

impl<N: Scalar> SchedulerPolicy<N> for KeepFast {
    fn name(&self) -> &str {
        "keep-fast"
    }

    fn model(&self) -> CommitmentModel {
        CommitmentModel::Never
    }

    fn decide(&mut self, state: &EngineState<N>, _wakeups: &mut Wakeups<N>) -> Command {
        self.keep_fast_decide(state)
    }
}

/// Never-committing baseline: like [`KeepFast`], but when a task with infinite
/// slow runtime arrives while the fast machine runs a finite-`s` task, that task
/// is cancelled and restarted on a slow machine.
#[derive(Debug, Clone, Default)]
pub struct BailToSlow {
    seen: usize,
    to_slow: Vec<usize>,
}

impl BailToSlow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bail_to_slow_decide<N: Scalar>(&mut self, state: &EngineState<N>) -> Command {
        if let Some(pos) = self.to_slow.iter().position(|id| state.standby().contains(id)) {
            return Command::StartSlow(self.to_slow.remove(pos));
        }
        if state.arrived_count() > self.seen {
            let fresh = self.seen..state.arrived_count();
            self.seen = state.arrived_count();
            let infinite_arrival = fresh.into_iter().any(|id| state.task(id).s.is_infinite());
            if let Some(running) = state.fast_task() {
                if infinite_arrival && !state.task(running).s.is_infinite() {
                    self.to_slow.push(running);
                    return Command::Cancel(running);
                }
            }
        }
        KeepFast.keep_fast_decide(state)
    }
}

impl<N: Scalar> SchedulerPolicy<N> for BailToSlow {
    fn name(&self) -> &str {
        "bail-to-slow"
    }

    fn model(&self) -> CommitmentModel {
        CommitmentModel::Never
    }

    fn decide(&mut self, state: &EngineState<N>, _wakeups: &mut Wakeups<N>) -> Command {
        self.bail_to_slow_decide(state)
    }
}

/// Policies selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    H,
    HNoElig,
    KeepFast,
    BailToSlow,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::H, PolicyKind::HNoElig, PolicyKind::KeepFast, PolicyKind::BailToSlow];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::H => "h",
            PolicyKind::HNoElig => "h-noelig",
            PolicyKind::KeepFast => "keep-fast",
            PolicyKind::BailToSlow => "bail-to-slow",
        }
    }

    pub fn model(&self) -> CommitmentModel {
        match self {
            PolicyKind::H | PolicyKind::HNoElig => CommitmentModel::Eventual,
            PolicyKind::KeepFast | PolicyKind::BailToSlow => CommitmentModel::Never,
        }
    }

    pub fn build<N: Scalar>(&self) -> Box<dyn SchedulerPolicy<N> + Send> {
        match self {
            PolicyKind::H => Box::new(HPolicy::<N>::new()),
            PolicyKind::HNoElig => Box::new(HPolicy::<N>::without_eligibility()),
            PolicyKind::KeepFast => Box::new(KeepFast),
            PolicyKind::BailToSlow => Box::new(BailToSlow::new()),
        }
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| format!("unknown policy `{s}` (expected h, h-noelig, keep-fast or bail-to-slow)"))
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
