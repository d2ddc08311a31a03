//! The offline optimum OPT, its prefix version `OPT(t)`, the knowledge function
//! `R(P)`, and an exhaustive oracle used to cross-check OPT.
//!
//! OPT evaluates the all-fast plan `q_0` and, for every task `i` with finite slow
//! runtime, the threshold plan `q_i` that sends every task `j` with
//! `s_j + t_j <= s_i + t_i` to a slow machine. The plan with the smallest
//! completion time wins.
//!
//! Several plans can tie. We pick the tied plan with the largest threshold (the
//! all-fast plan counts as threshold −∞), which makes OPT send a task to a slow
//! machine whenever that does not increase the completion time: every task with
//! `s_j + t_j <= C` ends up slow.

use std::cmp::Ordering;

use thiserror::Error;

use crate::model::{fast_makespan, plan_makespan, AssignmentPlan, Placement, Tap};
use crate::scalar::Scalar;

/// Default task-count cap for [`brute_force_opt`].
pub const BRUTE_FORCE_CAP: usize = 16;

/// Which threshold plan OPT selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Threshold {
    AllFast,
    /// Every task at most as large as this task goes slow.
    Task(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<N> {
    pub plan: AssignmentPlan,
    /// `C`: completion time of the plan.
    pub completion: N,
    /// `C̃`: completion time of the plan's fast machine.
    pub fast_runtime: N,
    pub threshold: Threshold,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OfflineError {
    #[error("brute force limited to {cap} tasks, got {n}")]
    CapExceeded { n: usize, cap: usize },
}

fn threshold_fast_runtime<N: Scalar>(tap: &Tap<N>, largeness: &[N], threshold: Option<&N>) -> N {
    fast_makespan(
        tap.tasks()
            .iter()
            .zip(largeness)
            .filter(|(_, l)| threshold.is_none_or(|th| l.gt(th)))
            .map(|(task, _)| (&task.f, &task.t)),
    )
}

/// The offline optimal plan for the whole TAP.
pub fn opt<N: Scalar>(tap: &Tap<N>) -> OptResult<N> {
    let largeness: Vec<N> = tap.tasks().iter().map(|task| task.largeness()).collect();

    let mut best_fast = threshold_fast_runtime(tap, &largeness, None);
    let mut best_completion = best_fast.clone();
    let mut best: Option<usize> = None;

    for (i, task) in tap.tasks().iter().enumerate() {
        if task.s.is_infinite() {
            continue;
        }
        let theta = &largeness[i];
        // equal thresholds give the same plan; keep the lowest id
        if largeness[..i].iter().zip(tap.tasks()).any(|(l, t)| !t.s.is_infinite() && l.same(theta)) {
            continue;
        }
        let fast = threshold_fast_runtime(tap, &largeness, Some(theta));
        let completion = fast.max_of(theta);
        let better = match completion.compare(&best_completion) {
            Ordering::Less => true,
            Ordering::Equal => best.is_none_or(|b| theta.gt(&largeness[b])),
            Ordering::Greater => false,
        };
        if better {
            best = Some(i);
            best_completion = completion;
            best_fast = fast;
        }
    }

    let placement = match best {
        None => vec![Placement::Fast; tap.len()],
        Some(b) => {
            largeness.iter().map(|l| if l.le(&largeness[b]) { Placement::Slow } else { Placement::Fast }).collect()
        }
    };
    OptResult {
        plan: AssignmentPlan { placement },
        completion: best_completion,
        fast_runtime: best_fast,
        threshold: best.map_or(Threshold::AllFast, Threshold::Task),
    }
}

/// `OPT(t)`: OPT over the tasks that have arrived by time `t` (inclusive).
pub fn opt_prefix<N: Scalar>(tap: &Tap<N>, t: &N) -> OptResult<N> {
    opt(&tap.prefix_until(t))
}

/// OPT evaluated at every distinct arrival time, in order.
pub fn prefix_table<N: Scalar>(tap: &Tap<N>) -> Vec<(N, OptResult<N>)> {
    tap.arrival_times()
        .into_iter()
        .map(|t| {
            let result = opt_prefix(tap, &t);
            (t, result)
        })
        .collect()
}

/// Exhaustive search over all `2^n` plans, with the default cap.
pub fn brute_force_opt<N: Scalar>(tap: &Tap<N>) -> Result<OptResult<N>, OfflineError> {
    brute_force_opt_capped(tap, BRUTE_FORCE_CAP)
}

pub fn brute_force_opt_capped<N: Scalar>(tap: &Tap<N>, cap: usize) -> Result<OptResult<N>, OfflineError> {
    let n = tap.len();
    if n > cap {
        return Err(OfflineError::CapExceeded { n, cap });
    }
    let infinite_mask: u64 =
        tap.tasks().iter().filter(|task| task.s.is_infinite()).fold(0, |m, task| m | (1 << task.id));
    let mut best: Option<(N, u64)> = None;
    for mask in 0u64..(1u64 << n) {
        if mask & infinite_mask != 0 {
            continue;
        }
        let plan = mask_plan(n, mask);
        let k = plan_makespan(tap, &plan);
        if best.as_ref().is_none_or(|(b, _)| k.lt(b)) {
            best = Some((k, mask));
        }
    }
    let (completion, mask) = best.expect("mask 0 is always feasible");
    let plan = mask_plan(n, mask);
    let fast_runtime = fast_makespan(tap.tasks().iter().filter(|t| plan.is_fast(t.id)).map(|t| (&t.f, &t.t)));
    let threshold = plan
        .slow_ids()
        .max_by(|&a, &b| tap.task(a).largeness().compare(&tap.task(b).largeness()).then(b.cmp(&a)))
        .map_or(Threshold::AllFast, Threshold::Task);
    Ok(OptResult { plan, completion, fast_runtime, threshold })
}

fn mask_plan(n: usize, mask: u64) -> AssignmentPlan {
    AssignmentPlan {
        placement: (0..n).map(|i| if mask >> i & 1 == 1 { Placement::Slow } else { Placement::Fast }).collect(),
    }
}

/// `R(P)`: the earliest arrival time at which `C^t >= P`.
///
/// `C^t` is a right-continuous step function that only moves at arrivals, so the
/// answer is always an arrival time (or 0 when `P <= 0`). `None` when even
/// `C^∞ < P`.
pub fn r_of<N: Scalar>(tap: &Tap<N>, p: &N) -> Option<N> {
    if p.le(&N::zero()) {
        return Some(N::zero());
    }
    tap.arrival_times().into_iter().find(|t| opt_prefix(tap, t).completion.ge(p))
}

/// Same as [`r_of`] but reuses a table from [`prefix_table`].
pub fn r_of_table<N: Scalar>(table: &[(N, OptResult<N>)], p: &N) -> Option<N> {
    if p.le(&N::zero()) {
        return Some(N::zero());
    }
    table.iter().find(|(_, r)| r.completion.ge(p)).map(|(t, _)| t.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::build_lb_tap;
    use crate::exactnum::QNum;

    fn q(s: &str) -> QNum {
        s.parse().unwrap()
    }

    fn tap(items: &[(&str, &str, &str)]) -> Tap {
        Tap::new(items.iter().map(|(f, s, t)| (q(f), q(s), q(t)))).unwrap()
    }

    #[test]
    fn two_task_example() {
        let t = tap(&[("1", "2", "0"), ("1", "3", "0")]);
        let r = opt(&t);
        assert_eq!(r.completion, q("2"));
        assert_eq!(r.plan.placement, vec![Placement::Slow, Placement::Fast]);
        assert_eq!(r.threshold, Threshold::Task(0));
        assert_eq!(brute_force_opt(&t).unwrap().completion, q("2"));
    }

    #[test]
    fn single_task_tie_prefers_slow() {
        let r = opt(&tap(&[("1", "1", "0")]));
        assert_eq!(r.completion, q("1"));
        assert_eq!(r.plan.placement, vec![Placement::Slow]);
        assert_eq!(r.fast_runtime, q("0"));

        let r = brute_force_opt(&tap(&[("10", "100", "0")])).unwrap();
        assert_eq!(r.completion, q("10"));
        assert_eq!(r.plan.placement, vec![Placement::Fast]);
    }

    #[test]
    fn lb_tap_prefixes() {
        let lb = build_lb_tap(10).unwrap();
        let at_tl = opt_prefix(&lb, &q("0.75"));
        assert_eq!(at_tl.completion, q("3/2"));
        assert!(at_tl.plan.is_slow(0));
        assert!(at_tl.plan.fast_ids().eq(1..lb.len()));
        for i in 1..=4 {
            let t = QNum::ratio(3 * i, 20);
            assert_eq!(opt_prefix(&lb, &t).completion, QNum::ratio(10 + i, 10));
        }
        assert_eq!(opt_prefix(&lb, &q("-1")).completion, q("0"));
        assert_eq!(opt_prefix(&lb, &q("100")), opt(&lb));
        assert_eq!(brute_force_opt(&build_lb_tap(4).unwrap()).unwrap().completion, q("3/2"));
    }

    #[test]
    fn brute_force_cap() {
        let big = Tap::new((0..17).map(|_| (q("1"), q("2"), q("0")))).unwrap();
        assert_eq!(brute_force_opt(&big), Err(OfflineError::CapExceeded { n: 17, cap: 16 }));
    }

    #[test]
    fn knowledge_function() {
        let lb = build_lb_tap(10).unwrap();
        assert_eq!(r_of(&lb, &q("3/2")), Some(q("0.75")));
        assert_eq!(r_of(&lb, &q("0")), Some(q("0")));
        let c_inf = opt(&lb).completion;
        assert_eq!(r_of(&lb, &(c_inf + q("1"))), None);
        let table = prefix_table(&lb);
        assert_eq!(r_of_table(&table, &q("1.2")), r_of(&lb, &q("1.2")));
    }

    #[test]
    fn empty_tap() {
        let r = opt(&Tap::<QNum>::empty());
        assert_eq!(r.completion, q("0"));
        assert_eq!(r.threshold, Threshold::AllFast);
    }
}
