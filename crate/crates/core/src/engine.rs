//! Discrete-event simulator for online schedulers.
//!
//! Time advances from one event instant to the next: arrivals, fast-machine
//! finishes, slow-machine finishes and wake-ups requested by the policy. At each
//! instant the engine
//!
//! 1. delivers every arrival due at that instant, in TAP order;
//! 2. records every finish due at that instant (fast machine first, then slow
//!    machines by id);
//! 3. invokes the policy repeatedly, applying each command immediately, until
//!    the policy answers [`Command::Noop`].
//!
//! Because finishes are recorded before the policy runs, a machine whose task
//! ends at `t` is already free for commands issued at `t`. This fixed ordering
//! stands in for reasoning about "the instant just before `t`".

use std::cell::OnceCell;
use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::model::{validate_tap, EventKind, Tap, TapViolation, Task, Trace};
use crate::offline::{opt, OptResult};
use crate::scalar::Scalar;

/// Commitment contract a run is held to. Ordered from most to least restrictive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CommitmentModel {
    /// Every task must be started at its arrival instant.
    Instant,
    /// Starts are irrevocable; no cancellation.
    Eventual,
    /// Running tasks may be cancelled and restarted later from scratch.
    Never,
}

impl fmt::Display for CommitmentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommitmentModel::Instant => "instant",
            CommitmentModel::Eventual => "eventual",
            CommitmentModel::Never => "never",
        })
    }
}

impl std::str::FromStr for CommitmentModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "instant" => Ok(CommitmentModel::Instant),
            "eventual" => Ok(CommitmentModel::Eventual),
            "never" => Ok(CommitmentModel::Never),
            other => Err(format!("unknown commitment model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    StartFast(usize),
    StartSlow(usize),
    Cancel(usize),
    Noop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Machine {
    Fast,
    Slow(usize),
}

/// Wake-up requests collected during one policy invocation.
#[derive(Debug)]
pub struct Wakeups<N> {
    requested: Vec<N>,
}

impl<N: Scalar> Wakeups<N> {
    fn new() -> Self {
        Wakeups { requested: Vec::new() }
    }

    /// Asks the engine to invoke the policy again at exactly `time` (`>= now`).
    pub fn request(&mut self, time: N) {
        self.requested.push(time);
    }
}

/// A decision procedure driven by the engine.
pub trait SchedulerPolicy<N: Scalar> {
    fn name(&self) -> &str;

    /// The most permissive contract this policy needs.
    fn model(&self) -> CommitmentModel;

    /// Returns one command; the engine calls again until `Noop`.
    fn decide(&mut self, state: &EngineState<N>, wakeups: &mut Wakeups<N>) -> Command;
}

impl<N: Scalar, P: SchedulerPolicy<N> + ?Sized> SchedulerPolicy<N> for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn model(&self) -> CommitmentModel {
        (**self).model()
    }
    fn decide(&mut self, state: &EngineState<N>, wakeups: &mut Wakeups<N>) -> Command {
        (**self).decide(state, wakeups)
    }
}

impl<N: Scalar, P: SchedulerPolicy<N> + ?Sized> SchedulerPolicy<N> for &mut P {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn model(&self) -> CommitmentModel {
        (**self).model()
    }
    fn decide(&mut self, state: &EngineState<N>, wakeups: &mut Wakeups<N>) -> Command {
        (**self).decide(state, wakeups)
    }
}

#[derive(Debug, Clone)]
struct SlowRun<N> {
    task: usize,
    machine: usize,
    end: N,
}

/// What a policy can observe: only delivered tasks are visible.
#[derive(Debug)]
pub struct EngineState<N: Scalar> {
    now: N,
    tap: Tap<N>,
    arrived: usize,
    standby: Vec<usize>,
    fast: Option<(usize, N)>,
    slow: Vec<SlowRun<N>>,
    finished: Vec<bool>,
    history: Trace<N>,
    prefix_opt: OnceCell<OptResult<N>>,
}

impl<N: Scalar> EngineState<N> {
    pub fn now(&self) -> &N {
        &self.now
    }

    /// Arrived tasks that are not running or finished, by increasing id.
    pub fn standby(&self) -> &[usize] {
        &self.standby
    }

    /// Number of delivered tasks; ids `0..arrived_count()` are visible.
    pub fn arrived_count(&self) -> usize {
        self.arrived
    }

    pub fn arrived_tasks(&self) -> &[Task<N>] {
        &self.tap.tasks()[..self.arrived]
    }

    /// A delivered task. Panics for tasks that have not arrived yet.
    pub fn task(&self, id: usize) -> &Task<N> {
        assert!(id < self.arrived, "task {id} has not arrived");
        self.tap.task(id)
    }

    pub fn fast_free(&self) -> bool {
        self.fast.is_none()
    }

    /// Finish time of the fast machine's current task, `None` when free.
    pub fn fast_busy_until(&self) -> Option<&N> {
        self.fast.as_ref().map(|(_, end)| end)
    }

    pub fn fast_task(&self) -> Option<usize> {
        self.fast.as_ref().map(|(task, _)| *task)
    }

    pub fn running(&self) -> impl Iterator<Item = (usize, Machine)> + '_ {
        self.fast
            .iter()
            .map(|(task, _)| (*task, Machine::Fast))
            .chain(self.slow.iter().map(|run| (run.task, Machine::Slow(run.machine))))
    }

    pub fn is_finished(&self, id: usize) -> bool {
        self.finished[id]
    }

    pub fn history(&self) -> &Trace<N> {
        &self.history
    }

    /// OPT over the delivered tasks, i.e. `OPT(now)`.
    pub fn prefix_opt(&self) -> &OptResult<N> {
        self.prefix_opt.get_or_init(|| opt(&self.tap.prefix(self.arrived)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimErrorKind {
    #[error("invalid TAP: {0}")]
    InvalidTap(#[from] TapViolation),
    #[error("policy `{policy}` needs the {needs} model but the engine enforces {engine}")]
    ModelMismatch { policy: String, needs: CommitmentModel, engine: CommitmentModel },
    #[error("illegal command {command:?}: {reason}")]
    IllegalCommand { command: Command, reason: String },
    #[error("wake-up requested in the past")]
    PastWakeup,
    #[error("policy did not reach a fixpoint within {limit} commands")]
    FixpointExceeded { limit: usize },
    #[error("no events remain but tasks {tasks:?} were never started")]
    Stalled { tasks: Vec<usize> },
    #[error("task {task} was not started at its arrival under instant commitment")]
    InstantViolation { task: usize },
}

/// An aborted run together with the trace recorded up to the failure.
#[derive(Debug, Clone, Error)]
#[error("simulation aborted at event {}: {kind}", trace.len())]
pub struct SimError<N: Scalar> {
    pub kind: SimErrorKind,
    pub trace: Trace<N>,
}

/// A run in progress. [`Simulation::step`] advances one event instant.
pub struct Simulation<N: Scalar, P> {
    state: EngineState<N>,
    policy: P,
    model: CommitmentModel,
    wakeups: Vec<N>,
    limit: usize,
    next_machine: usize,
}

impl<N: Scalar, P: SchedulerPolicy<N>> Simulation<N, P> {
    /// Runs under the policy's own commitment model.
    pub fn new(tap: Tap<N>, policy: P) -> Result<Self, SimError<N>> {
        let model = policy.model();
        Self::with_model(tap, policy, model)
    }

    pub fn with_model(tap: Tap<N>, policy: P, model: CommitmentModel) -> Result<Self, SimError<N>> {
        let fail = |kind| SimError { kind, trace: Trace::new() };
        validate_tap(&tap).map_err(|v| fail(v.into()))?;
        if policy.model() > model {
            return Err(fail(SimErrorKind::ModelMismatch {
                policy: policy.name().to_string(),
                needs: policy.model(),
                engine: model,
            }));
        }
        let n = tap.len();
        Ok(Simulation {
            state: EngineState {
                now: N::zero(),
                tap,
                arrived: 0,
                standby: Vec::new(),
                fast: None,
                slow: Vec::new(),
                finished: vec![false; n],
                history: Trace::new(),
                prefix_opt: OnceCell::new(),
            },
            policy,
            model,
            wakeups: Vec::new(),
            limit: n,
            next_machine: 0,
        })
    }

    pub fn state(&self) -> &EngineState<N> {
        &self.state
    }

    pub fn trace(&self) -> &Trace<N> {
        &self.state.history
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    /// Number of tasks delivered so far.
    pub fn delivered(&self) -> usize {
        self.state.arrived
    }

    pub fn model(&self) -> CommitmentModel {
        self.model
    }

    /// Stops delivering tasks. Records a `Truncate` event at the current instant.
    pub fn truncate(&mut self) {
        if self.limit > self.state.arrived {
            self.limit = self.state.arrived;
            let now = self.state.now.clone();
            self.state.history.push(now, EventKind::Truncate, self.state.arrived);
        }
    }

    pub fn next_event_time(&self) -> Option<N> {
        let st = &self.state;
        let mut next: Option<N> = None;
        let mut consider = |t: &N| {
            if next.as_ref().is_none_or(|n| t.lt(n)) {
                next = Some(t.clone());
            }
        };
        if st.arrived < self.limit {
            consider(&st.tap.task(st.arrived).t);
        }
        if let Some((_, end)) = &st.fast {
            consider(end);
        }
        for run in &st.slow {
            consider(&run.end);
        }
        for w in &self.wakeups {
            consider(w);
        }
        next
    }

    fn error(&self, kind: SimErrorKind) -> SimError<N> {
        SimError { kind, trace: self.state.history.clone() }
    }

    /// Processes the next event instant. Returns `Ok(false)` once nothing is left.
    pub fn step(&mut self) -> Result<bool, SimError<N>> {
        let Some(now) = self.next_event_time() else {
            if !self.state.standby.is_empty() {
                return Err(self.error(SimErrorKind::Stalled { tasks: self.state.standby.clone() }));
            }
            return Ok(false);
        };
        self.state.now = now.clone();
        let st = &mut self.state;

        while st.arrived < self.limit && st.tap.task(st.arrived).t.le(&now) {
            let id = st.arrived;
            st.history.push(now.clone(), EventKind::Arrive, id);
            st.standby.push(id);
            st.arrived += 1;
            st.prefix_opt = OnceCell::new();
        }

        if let Some((task, end)) = st.fast.clone() {
            if end.le(&now) {
                st.history.push(now.clone(), EventKind::FinishFast, task);
                st.finished[task] = true;
                st.fast = None;
            }
        }
        let (done, still): (Vec<_>, Vec<_>) =
            std::mem::take(&mut st.slow).into_iter().partition(|run| run.end.le(&now));
        st.slow = still;
        for run in done {
            st.history.push(now.clone(), EventKind::FinishSlow { machine: run.machine }, run.task);
            st.finished[run.task] = true;
        }

        self.wakeups.retain(|w| w.gt(&now));

        let limit = self.state.tap.len() + 1;
        let mut issued = 0;
        loop {
            let mut requests = Wakeups::new();
            let command = self.policy.decide(&self.state, &mut requests);
            for time in requests.requested {
                match time.compare(&now) {
                    Ordering::Less => return Err(self.error(SimErrorKind::PastWakeup)),
                    Ordering::Equal => {}
                    Ordering::Greater => {
                        if !self.wakeups.iter().any(|w| w.same(&time)) {
                            self.wakeups.push(time);
                        }
                    }
                }
            }
            if command == Command::Noop {
                break;
            }
            issued += 1;
            if issued > limit {
                return Err(self.error(SimErrorKind::FixpointExceeded { limit }));
            }
            self.apply(command)?;
        }

        if self.model == CommitmentModel::Instant {
            if let Some(&task) = self.state.standby.first() {
                return Err(self.error(SimErrorKind::InstantViolation { task }));
            }
        }
        Ok(true)
    }

    fn apply(&mut self, command: Command) -> Result<(), SimError<N>> {
        let illegal = |this: &Self, reason: &str| {
            Err(this.error(SimErrorKind::IllegalCommand { command, reason: reason.to_string() }))
        };
        let now = self.state.now.clone();
        match command {
            Command::Noop => Ok(()),
            Command::StartFast(id) | Command::StartSlow(id) => {
                if id >= self.state.arrived {
                    return illegal(self, "unknown task");
                }
                let Some(pos) = self.state.standby.iter().position(|&s| s == id) else {
                    return illegal(self, "task is not on standby");
                };
                let task = self.state.tap.task(id).clone();
                if let Command::StartFast(_) = command {
                    if !self.state.fast_free() {
                        return illegal(self, "fast machine is busy");
                    }
                    self.state.standby.remove(pos);
                    self.state.history.push(now.clone(), EventKind::StartFast, id);
                    self.state.fast = Some((id, now.plus(&task.f)));
                } else {
                    if task.s.is_infinite() {
                        return illegal(self, "infinite slow runtime would never finish");
                    }
                    self.state.standby.remove(pos);
                    let machine = self.next_machine;
                    self.next_machine += 1;
                    self.state.history.push(now.clone(), EventKind::StartSlow { machine }, id);
                    self.state.slow.push(SlowRun { task: id, machine, end: now.plus(&task.s) });
                }
                Ok(())
            }
            Command::Cancel(id) => {
                if self.model != CommitmentModel::Never {
                    return illegal(self, "cancellation requires the never-committing model");
                }
                if id >= self.state.arrived {
                    return illegal(self, "unknown task");
                }
                if self.state.fast_task() == Some(id) {
                    self.state.fast = None;
                } else if let Some(pos) = self.state.slow.iter().position(|run| run.task == id) {
                    self.state.slow.remove(pos);
                } else {
                    return illegal(self, "task is not running");
                }
                self.state.history.push(now, EventKind::Cancel, id);
                let pos = self.state.standby.partition_point(|&s| s < id);
                self.state.standby.insert(pos, id);
                Ok(())
            }
        }
    }

    /// Runs to completion and returns the full trace.
    pub fn run(mut self) -> Result<Trace<N>, SimError<N>> {
        while self.step()? {}
        Ok(self.state.history)
    }

    pub fn into_parts(self) -> (Trace<N>, P) {
        (self.state.history, self.policy)
    }
}

/// Runs `policy` over `tap` under `model` and returns the complete trace.
pub fn simulate<N: Scalar, P: SchedulerPolicy<N>>(
    tap: &Tap<N>,
    policy: P,
    model: CommitmentModel,
) -> Result<Trace<N>, SimError<N>> {
    Simulation::with_model(tap.clone(), policy, model)?.run()
}
