//! Tasks, task arrival processes, assignment plans and traces.
//!
//! # Fast-machine order
//!
//! A fast machine processes its tasks non-idling in arrival order (FIFO). For a
//! single machine with release dates this is makespan-optimal: if some schedule
//! runs `j` immediately before `i` although `t_i <= t_j`, swapping the two keeps
//! both inside the same busy window and cannot delay the later of the two
//! completions, so repeated swaps reach FIFO without increasing the makespan.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::CommitmentModel;
use crate::exactnum::QNum;
use crate::scalar::Scalar;

/// A task `(f, s, t)`: fast runtime, slow runtime (possibly infinite), arrival.
#[derive(Clone, Debug, PartialEq)]
pub struct Task<N = QNum> {
    pub id: usize,
    pub f: N,
    pub s: N,
    pub t: N,
}

impl<N: Scalar> Task<N> {
    pub fn new(id: usize, f: N, s: N, t: N) -> Self {
        Task { id, f, s, t }
    }

    /// `s + t`, the completion time if started on a slow machine at arrival.
    pub fn largeness(&self) -> N {
        self.s.plus(&self.t)
    }
}

/// Compares two tasks by largeness (`s + t`). `Greater` means `x` is larger.
pub fn larger<N: Scalar>(x: &Task<N>, y: &Task<N>) -> Ordering {
    x.largeness().compare(&y.largeness())
}

/// A task arrival process: tasks in non-decreasing arrival order, ids `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tap<N = QNum> {
    tasks: Vec<Task<N>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TapViolation {
    #[error("task {index} carries id {id}; ids must be 0..n in list order")]
    BadId { index: usize, id: usize },
    #[error("task {id}: arrival time must be finite and >= 0")]
    BadArrival { id: usize },
    #[error("task {id}: fast runtime must be finite and > 0")]
    BadFast { id: usize },
    #[error("task {id}: slow runtime is below the fast runtime (s < f)")]
    SlowBelowFast { id: usize },
    #[error("task {id} arrives before task {prev}")]
    ArrivalOrder { id: usize, prev: usize },
}

impl<N: Scalar> Tap<N> {
    /// Builds a TAP from `(f, s, t)` triples without validating it.
    pub fn from_triples(triples: impl IntoIterator<Item = (N, N, N)>) -> Self {
        let tasks = triples.into_iter().enumerate().map(|(id, (f, s, t))| Task { id, f, s, t }).collect();
        Tap { tasks }
    }

    /// Builds and validates a TAP.
    pub fn new(triples: impl IntoIterator<Item = (N, N, N)>) -> Result<Self, TapViolation> {
        let tap = Self::from_triples(triples);
        validate_tap(&tap)?;
        Ok(tap)
    }

    pub fn empty() -> Self {
        Tap { tasks: Vec::new() }
    }

    pub fn tasks(&self) -> &[Task<N>] {
        &self.tasks
    }

    pub fn task(&self, id: usize) -> &Task<N> {
        &self.tasks[id]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// The sub-TAP of tasks with `t_i <= t`.
    pub fn prefix_until(&self, t: &N) -> Tap<N> {
        let end = self.tasks.iter().take_while(|task| task.t.le(t)).count();
        self.prefix(end)
    }

    /// The first `count` tasks.
    pub fn prefix(&self, count: usize) -> Tap<N> {
        Tap { tasks: self.tasks[..count.min(self.tasks.len())].to_vec() }
    }

    /// Copy with task `removed` dropped and ids renumbered.
    pub fn without(&self, removed: usize) -> Tap<N> {
        Tap::from_triples(
            self.tasks
                .iter()
                .filter(|task| task.id != removed)
                .map(|task| (task.f.clone(), task.s.clone(), task.t.clone())),
        )
    }

    /// Distinct arrival times in increasing order.
    pub fn arrival_times(&self) -> Vec<N> {
        let mut times: Vec<N> = Vec::new();
        for task in &self.tasks {
            if times.last().is_none_or(|last| !last.same(&task.t)) {
                times.push(task.t.clone());
            }
        }
        times
    }

    pub fn map_scalar<M: Scalar>(&self, f: impl Fn(&N) -> M) -> Tap<M> {
        Tap {
            tasks: self
                .tasks
                .iter()
                .map(|task| Task { id: task.id, f: f(&task.f), s: f(&task.s), t: f(&task.t) })
                .collect(),
        }
    }

    /// Serializes to the JSON TAP document (`{"tasks": [{"f","s","t"}, ...]}`).
    pub fn to_json(&self) -> String {
        let doc = TapDocument {
            tasks: self
                .tasks
                .iter()
                .map(|task| TaskRecord { f: task.f.to_string(), s: task.s.to_string(), t: task.t.to_string() })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("TAP serialization cannot fail")
    }
}

impl Tap<QNum> {
    /// Parses and validates a JSON TAP document.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        #[derive(Deserialize)]
        struct Doc {
            tasks: Vec<Rec>,
        }
        #[derive(Deserialize)]
        struct Rec {
            f: QNum,
            s: QNum,
            t: QNum,
        }
        let doc: Doc = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        let tap = Tap::new(doc.tasks.into_iter().map(|r| (r.f, r.s, r.t)))?;
        Ok(tap)
    }

    /// Lossy conversion to float mode.
    pub fn to_float<M: Scalar>(&self) -> Tap<M> {
        self.map_scalar(M::from_qnum)
    }
}

#[derive(Serialize, Deserialize)]
struct TapDocument {
    tasks: Vec<TaskRecord>,
}

#[derive(Serialize, Deserialize)]
struct TaskRecord {
    f: String,
    s: String,
    t: String,
}

/// Checks every task and TAP invariant; reports the first violation found.
pub fn validate_tap<N: Scalar>(tap: &Tap<N>) -> Result<(), TapViolation> {
    let zero = N::zero();
    for (index, task) in tap.tasks.iter().enumerate() {
        let id = task.id;
        if id != index {
            return Err(TapViolation::BadId { index, id });
        }
        if task.t.is_infinite() || task.t.lt(&zero) {
            return Err(TapViolation::BadArrival { id });
        }
        if task.f.is_infinite() || !task.f.gt(&zero) {
            return Err(TapViolation::BadFast { id });
        }
        if task.s.lt(&task.f) {
            return Err(TapViolation::SlowBelowFast { id });
        }
        if index > 0 && task.t.lt(&tap.tasks[index - 1].t) {
            return Err(TapViolation::ArrivalOrder { id, prev: index - 1 });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placement {
    Fast,
    Slow,
}

/// Offline assignment of every task to the fast machine or a slow machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentPlan {
    pub placement: Vec<Placement>,
}

impl AssignmentPlan {
    pub fn all(n: usize, placement: Placement) -> Self {
        AssignmentPlan { placement: vec![placement; n] }
    }

    pub fn is_slow(&self, id: usize) -> bool {
        self.placement[id] == Placement::Slow
    }

    pub fn is_fast(&self, id: usize) -> bool {
        self.placement[id] == Placement::Fast
    }

    pub fn slow_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.placement.iter().enumerate().filter(|(_, p)| **p == Placement::Slow).map(|(i, _)| i)
    }

    pub fn fast_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.placement.iter().enumerate().filter(|(_, p)| **p == Placement::Fast).map(|(i, _)| i)
    }
}

/// Non-idling FIFO makespan of one machine over `(f, t)` jobs sorted by arrival.
pub fn fast_makespan<'a, N: Scalar>(jobs: impl IntoIterator<Item = (&'a N, &'a N)>) -> N {
    jobs.into_iter().fold(N::zero(), |load, (f, t)| load.max_of(t).plus(f))
}

/// Completion time `K(q)` of a plan: fast FIFO makespan vs. latest slow finish.
pub fn plan_makespan<N: Scalar>(tap: &Tap<N>, plan: &AssignmentPlan) -> N {
    assert_eq!(plan.placement.len(), tap.len(), "plan does not cover the TAP");
    let fast = fast_makespan(tap.tasks.iter().filter(|task| plan.is_fast(task.id)).map(|task| (&task.f, &task.t)));
    tap.tasks.iter().filter(|task| plan.is_slow(task.id)).fold(fast, |acc, task| acc.max_of(&task.largeness()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Arrive,
    StartFast,
    StartSlow {
        machine: usize,
    },
    FinishFast,
    FinishSlow {
        machine: usize,
    },
    Cancel,
    /// The adversary stopped delivering tasks; `task` is the first undelivered id.
    Truncate,
}

impl EventKind {
    /// Position inside one timestamp: arrivals, then finishes, then commands.
    pub fn phase(&self) -> u8 {
        match self {
            EventKind::Arrive => 0,
            EventKind::FinishFast | EventKind::FinishSlow { .. } => 1,
            EventKind::StartFast | EventKind::StartSlow { .. } | EventKind::Cancel => 2,
            EventKind::Truncate => 3,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            EventKind::Arrive => "arrive",
            EventKind::StartFast => "start-fast",
            EventKind::StartSlow { .. } => "start-slow",
            EventKind::FinishFast => "finish-fast",
            EventKind::FinishSlow { .. } => "finish-slow",
            EventKind::Cancel => "cancel",
            EventKind::Truncate => "truncate",
        }
    }

    fn machine(&self) -> Option<usize> {
        match self {
            EventKind::StartSlow { machine } | EventKind::FinishSlow { machine } => Some(*machine),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent<N = QNum> {
    pub time: N,
    pub kind: EventKind,
    pub task: usize,
}

/// Time-ordered record of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<N = QNum> {
    pub events: Vec<TraceEvent<N>>,
}

impl<N> Default for Trace<N> {
    fn default() -> Self {
        Trace { events: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed TAP document: {0}")]
    Json(String),
    #[error(transparent)]
    Violation(#[from] TapViolation),
    #[error("trace line {line}: {message}")]
    TraceParse { line: usize, message: String },
    #[error("trace is incomplete: task {task} never finished")]
    IncompleteTrace { task: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace event {index}: {message}")]
pub struct TraceViolation {
    pub index: usize,
    pub message: String,
}

impl<N: Scalar> Trace<N> {
    pub fn new() -> Self {
        Trace { events: Vec::new() }
    }

    pub fn push(&mut self, time: N, kind: EventKind, task: usize) {
        self.events.push(TraceEvent { time, kind, task });
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Final machine class of every task that was started, indexed by id.
    pub fn placements(&self, n: usize) -> Vec<Option<Placement>> {
        let mut out = vec![None; n];
        for ev in &self.events {
            match ev.kind {
                EventKind::StartFast => out[ev.task] = Some(Placement::Fast),
                EventKind::StartSlow { .. } => out[ev.task] = Some(Placement::Slow),
                EventKind::Cancel => out[ev.task] = None,
                _ => {}
            }
        }
        out
    }

    /// Start time of the last start of `task`.
    pub fn start_time(&self, task: usize) -> Option<&N> {
        self.events
            .iter()
            .rev()
            .find(|ev| ev.task == task && matches!(ev.kind, EventKind::StartFast | EventKind::StartSlow { .. }))
            .map(|ev| &ev.time)
    }

    /// Id of the first task that was never delivered, if the run was truncated.
    pub fn truncation(&self) -> Option<usize> {
        self.events.iter().find(|ev| ev.kind == EventKind::Truncate).map(|ev| ev.task)
    }

    /// Same events with only kinds, ids and machines (for cross-mode comparison).
    pub fn shape(&self) -> Vec<(EventKind, usize)> {
        self.events.iter().map(|ev| (ev.kind, ev.task)).collect()
    }

    /// One event per line: `time<TAB>kind<TAB>task[<TAB>machine]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&format!("{}\t{}\t{}", ev.time, ev.kind.label(), ev.task));
            if let Some(m) = ev.kind.machine() {
                out.push_str(&format!("\t{m}"));
            }
            out.push('\n');
        }
        out
    }
}

impl Trace<QNum> {
    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let mut trace = Trace::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| ModelError::TraceParse { line: line_no, message };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 3 {
                return Err(err("expected at least 3 tab-separated fields".into()));
            }
            let time = QNum::from_str(fields[0]).map_err(|e| err(e.to_string()))?;
            let task: usize = fields[2].trim().parse().map_err(|_| err(format!("bad task id `{}`", fields[2])))?;
            let machine = || -> Result<usize, ModelError> {
                fields
                    .get(3)
                    .ok_or_else(|| err("missing machine id".into()))?
                    .trim()
                    .parse()
                    .map_err(|_| err("bad machine id".into()))
            };
            let kind = match fields[1].trim() {
                "arrive" => EventKind::Arrive,
                "start-fast" => EventKind::StartFast,
                "start-slow" => EventKind::StartSlow { machine: machine()? },
                "finish-fast" => EventKind::FinishFast,
                "finish-slow" => EventKind::FinishSlow { machine: machine()? },
                "cancel" => EventKind::Cancel,
                "truncate" => EventKind::Truncate,
                other => return Err(err(format!("unknown event kind `{other}`"))),
            };
            trace.push(time, kind, task);
        }
        Ok(trace)
    }
}

/// Timestamp of the last finish; errors if an arrived task never finished.
pub fn trace_makespan<N: Scalar>(trace: &Trace<N>) -> Result<N, ModelError> {
    let mut pending: Vec<usize> = Vec::new();
    let mut last = N::zero();
    for ev in &trace.events {
        match ev.kind {
            EventKind::Arrive => pending.push(ev.task),
            EventKind::FinishFast | EventKind::FinishSlow { .. } => {
                pending.retain(|&t| t != ev.task);
                last = last.max_of(&ev.time);
            }
            _ => {}
        }
    }
    match pending.first() {
        Some(&task) => Err(ModelError::IncompleteTrace { task }),
        None => Ok(last),
    }
}

/// Checks every trace invariant for a run of `tap` under `model`.
pub fn check_trace<N: Scalar>(tap: &Tap<N>, trace: &Trace<N>, model: CommitmentModel) -> Result<(), TraceViolation> {
    #[derive(Clone, PartialEq)]
    enum State<N> {
        Unseen,
        Waiting,
        Fast(N),
        Slow(usize, N),
        Done,
    }
    let n = tap.len();
    let mut state: Vec<State<N>> = vec![State::Unseen; n];
    let mut starts = vec![0usize; n];
    let mut fast_owner: Option<usize> = None;
    let mut used_machines = std::collections::HashSet::new();
    let fail = |index: usize, message: String| Err(TraceViolation { index, message });

    for (index, ev) in trace.events.iter().enumerate() {
        if index > 0 {
            let prev = &trace.events[index - 1];
            match prev.time.compare(&ev.time) {
                Ordering::Greater => return fail(index, "timestamp decreases".into()),
                Ordering::Equal if prev.kind.phase() > ev.kind.phase() => {
                    return fail(
                        index,
                        format!("{} recorded after {} at one timestamp", ev.kind.label(), prev.kind.label()),
                    )
                }
                _ => {}
            }
        }
        if ev.kind == EventKind::Truncate {
            continue;
        }
        if ev.task >= n {
            return fail(index, format!("unknown task {}", ev.task));
        }
        let task = tap.task(ev.task);
        let current = state[ev.task].clone();
        match ev.kind {
            EventKind::Arrive => {
                if current != State::Unseen {
                    return fail(index, format!("task {} arrives twice", ev.task));
                }
                if !ev.time.same(&task.t) {
                    return fail(index, format!("task {} arrives at the wrong time", ev.task));
                }
                state[ev.task] = State::Waiting;
            }
            EventKind::StartFast | EventKind::StartSlow { .. } => {
                if current != State::Waiting {
                    return fail(index, format!("task {} started while not on standby", ev.task));
                }
                starts[ev.task] += 1;
                if model == CommitmentModel::Eventual && starts[ev.task] > 1 {
                    return fail(index, format!("task {} started twice under eventual commitment", ev.task));
                }
                if model == CommitmentModel::Instant && !ev.time.same(&task.t) {
                    return fail(index, format!("task {} not started at arrival under instant commitment", ev.task));
                }
                if let EventKind::StartSlow { machine } = ev.kind {
                    if !used_machines.insert(machine) {
                        return fail(index, format!("slow machine {machine} reused"));
                    }
                    state[ev.task] = State::Slow(machine, ev.time.plus(&task.s));
                } else {
                    if let Some(owner) = fast_owner {
                        return fail(index, format!("fast machine busy with task {owner}"));
                    }
                    fast_owner = Some(ev.task);
                    state[ev.task] = State::Fast(ev.time.plus(&task.f));
                }
            }
            EventKind::FinishFast => match current {
                State::Fast(end) if end.same(&ev.time) => {
                    fast_owner = None;
                    state[ev.task] = State::Done;
                }
                _ => return fail(index, format!("task {} finish-fast without a matching start", ev.task)),
            },
            EventKind::FinishSlow { machine } => match current {
                State::Slow(m, end) if m == machine && end.same(&ev.time) => state[ev.task] = State::Done,
                _ => return fail(index, format!("task {} finish-slow without a matching start", ev.task)),
            },
            EventKind::Cancel => {
                if model != CommitmentModel::Never {
                    return fail(index, "cancel outside the never-committing model".into());
                }
                match current {
                    State::Fast(_) => fast_owner = None,
                    State::Slow(..) => {}
                    _ => return fail(index, format!("cancel of task {} which is not running", ev.task)),
                }
                state[ev.task] = State::Waiting;
            }
            EventKind::Truncate => unreachable!(),
        }
    }
    Ok(())
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Fast => "fast",
            Placement::Slow => "slow",
        })
    }
}
