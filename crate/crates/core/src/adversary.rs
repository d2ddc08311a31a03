//! The never-committing lower-bound family and the adaptive adversary that
//! truncates it.
//!
//! For an even `k >= 2` the adversary has in mind
//!
//! ```text
//! τ_0 = (1, 3/2, 0)
//! τ_i = (1/k, ∞, 3i/(2k))      for i in 1..=k/2 - 1
//! τ_L = (3/4, ∞, 3/4)
//! ```
//!
//! and stops sending tasks the moment the scheduler places `τ_0` on a slow
//! machine. Prefix completions are `C^0 = 1`, `C^{t_i} = 1 + i/k` and
//! `C^{3/4} = 3/2`; moving `τ_0` at any of those instants costs a ratio of
//! exactly `3/2`, and never moving it costs `(9/4 − 1/k)/(3/2) = 3/2 − 2/(3k)`.

use thiserror::Error;

use crate::engine::{CommitmentModel, SchedulerPolicy, SimErrorKind, Simulation};
use crate::exactnum::QNum;
use crate::model::{trace_makespan, EventKind, Tap, Trace};
use crate::offline::{opt, opt_prefix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("k must be an even integer >= 2, got {0}")]
    BadK(usize),
    #[error("arrival index {i} outside 1..={max}")]
    IndexOutOfRange { i: usize, max: usize },
    #[error("move time must be >= 0")]
    NegativeTime,
    #[error("policy failed: {0}")]
    Policy(SimErrorKind),
}

fn check_k(k: usize) -> Result<(), AdversaryError> {
    if k < 2 || !k.is_multiple_of(2) {
        Err(AdversaryError::BadK(k))
    } else {
        Ok(())
    }
}

/// The full lower-bound TAP for parameter `k`.
pub fn build_lb_tap(k: usize) -> Result<Tap, AdversaryError> {
    check_k(k)?;
    let k_i = k as i64;
    let mut triples = vec![(QNum::one(), QNum::ratio(3, 2), QNum::zero())];
    for i in 1..(k_i / 2) {
        triples.push((QNum::ratio(1, k_i), QNum::infinity(), QNum::ratio(3 * i, 2 * k_i)));
    }
    triples.push((QNum::ratio(3, 4), QNum::infinity(), QNum::ratio(3, 4)));
    Ok(Tap::new(triples).expect("lower-bound TAP is valid by construction"))
}

/// `3/2 − 2/(3k)`: the ratio every scheduler is held to on this family.
pub fn ratio_floor(k: usize) -> QNum {
    QNum::ratio(3, 2) - QNum::ratio(2, 3 * k as i64)
}

/// Instant at which a scheduler might move `τ_0` to a slow machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MoveEvent {
    /// Arrival of `τ_i`, `1 <= i <= k/2 − 1`.
    AtArrival(usize),
    /// Arrival of `τ_L` at `3/4`.
    AtLast,
    AtTime(QNum),
}

/// Lower bound on the ratio if `τ_0` restarts on a slow machine at `event`:
/// `(t + 3/2) / C^t`.
pub fn counterfactual_move_ratio(k: usize, event: &MoveEvent) -> Result<QNum, AdversaryError> {
    let tap = build_lb_tap(k)?;
    let t = match event {
        MoveEvent::AtArrival(i) => {
            let max = k / 2 - 1;
            if *i < 1 || *i > max {
                return Err(AdversaryError::IndexOutOfRange { i: *i, max });
            }
            QNum::ratio(3 * *i as i64, 2 * k as i64)
        }
        MoveEvent::AtLast => QNum::ratio(3, 4),
        MoveEvent::AtTime(t) => {
            if t.sign().is_lt() {
                return Err(AdversaryError::NegativeTime);
            }
            t.clone()
        }
    };
    let c = opt_prefix(&tap, &t).completion;
    Ok((t + QNum::ratio(3, 2)) / c)
}

/// Outcome of one adversary game.
#[derive(Debug, Clone)]
pub struct AdversaryRun {
    pub k: usize,
    pub policy: String,
    /// Tasks actually sent.
    pub delivered: Tap,
    pub trace: Trace,
    /// Index of the `Truncate` event in `trace`, if the adversary cut the TAP.
    pub truncated_at: Option<usize>,
    /// Time at which the cut happened.
    pub truncation_time: Option<QNum>,
    /// `(t + 3/2) / C^t` at the cut.
    pub move_ratio: Option<QNum>,
    /// Makespan over `OPT(delivered)`; infinity if the policy never finished.
    pub final_ratio: QNum,
    pub makespan: Option<QNum>,
    pub opt_completion: QNum,
}

impl AdversaryRun {
    pub fn meets_floor(&self) -> bool {
        self.final_ratio >= ratio_floor(self.k)
    }
}

/// Plays the adversary against `policy` under the never-committing contract.
pub fn run_adversary<P: SchedulerPolicy<QNum>>(policy: P, k: usize) -> Result<AdversaryRun, AdversaryError> {
    let tap = build_lb_tap(k)?;
    let n = tap.len();
    let name = policy.name().to_string();
    let mut sim = Simulation::with_model(tap.clone(), policy, CommitmentModel::Never)
        .map_err(|e| AdversaryError::Policy(e.kind))?;

    let mut scanned = 0;
    let mut truncated_at = None;
    let mut truncation_time = None;
    let mut move_ratio = None;
    let mut stalled = false;
    loop {
        match sim.step() {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if matches!(e.kind, SimErrorKind::Stalled { .. }) => {
                stalled = true;
                break;
            }
            Err(e) => return Err(AdversaryError::Policy(e.kind)),
        }
        if truncated_at.is_some() {
            continue;
        }
        let moved = sim.trace().events[scanned..]
            .iter()
            .any(|ev| ev.task == 0 && matches!(ev.kind, EventKind::StartSlow { .. }));
        scanned = sim.trace().len();
        if moved && sim.delivered() < n {
            let now = sim.state().now().clone();
            sim.truncate();
            truncated_at = Some(sim.trace().len() - 1);
            move_ratio = Some(counterfactual_move_ratio(k, &MoveEvent::AtTime(now.clone()))?);
            truncation_time = Some(now);
        }
    }

    let delivered = tap.prefix(sim.delivered());
    let trace = sim.trace().clone();
    let opt_completion = opt(&delivered).completion;
    let makespan = if stalled { None } else { trace_makespan(&trace).ok() };
    let final_ratio = match &makespan {
        Some(m) => m / &opt_completion,
        None => QNum::infinity(),
    };
    Ok(AdversaryRun {
        k,
        policy: name,
        delivered,
        trace,
        truncated_at,
        truncation_time,
        move_ratio,
        final_ratio,
        makespan,
        opt_completion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedulers::{BailToSlow, HPolicy, KeepFast};

    fn q(s: &str) -> QNum {
        s.parse().unwrap()
    }

    #[test]
    fn lb_tap_shapes() {
        let four = build_lb_tap(4).unwrap();
        let triples: Vec<_> = four.tasks().iter().map(|t| (t.f.clone(), t.s.clone(), t.t.clone())).collect();
        assert_eq!(
            triples,
            vec![(q("1"), q("3/2"), q("0")), (q("1/4"), q("inf"), q("3/8")), (q("3/4"), q("inf"), q("3/4")),]
        );
        assert_eq!(build_lb_tap(2).unwrap().len(), 2);
        assert_eq!(build_lb_tap(3).unwrap_err(), AdversaryError::BadK(3));
        assert_eq!(build_lb_tap(0).unwrap_err(), AdversaryError::BadK(0));
    }

    #[test]
    fn move_ratios() {
        assert_eq!(counterfactual_move_ratio(10, &MoveEvent::AtArrival(3)).unwrap(), q("3/2"));
        assert_eq!(counterfactual_move_ratio(10, &MoveEvent::AtLast).unwrap(), q("3/2"));
        assert_eq!(counterfactual_move_ratio(10, &MoveEvent::AtTime(q("0"))).unwrap(), q("3/2"));
        assert!(matches!(
            counterfactual_move_ratio(10, &MoveEvent::AtArrival(5)),
            Err(AdversaryError::IndexOutOfRange { i: 5, max: 4 })
        ));
        assert_eq!(counterfactual_move_ratio(10, &MoveEvent::AtTime(q("-1"))), Err(AdversaryError::NegativeTime));
    }

    #[test]
    fn keep_fast_is_never_truncated() {
        let run = run_adversary(KeepFast, 10).unwrap();
        assert_eq!(run.truncated_at, None);
        assert_eq!(run.makespan, Some(q("2.15")));
        assert_eq!(run.final_ratio, q("43/30"));
        assert!(run.meets_floor());
    }

    #[test]
    fn bail_to_slow_is_cut_at_first_small_task() {
        let run = run_adversary(BailToSlow::new(), 10).unwrap();
        assert_eq!(run.truncation_time, Some(q("0.15")));
        assert_eq!(run.delivered.len(), 2);
        assert_eq!(run.final_ratio, q("3/2"));
        assert_eq!(run.move_ratio, Some(q("3/2")));
    }

    #[test]
    fn h_is_cut_at_time_zero() {
        let run = run_adversary(HPolicy::<QNum>::new(), 6).unwrap();
        assert_eq!(run.truncation_time, Some(q("0")));
        assert_eq!(run.delivered.len(), 1);
        assert_eq!(run.final_ratio, q("3/2"));
    }
}
