//! Competitive ratios, the A / F / F_big / F_small split of an H trace, and
//! checkers for the structural lemmas that hold on every H trace.
//!
//! Sets are defined against `OPT(∞)`:
//!
//! - `A`: fast in the trace and fast in `OPT(∞)`;
//! - `F`: fast in the trace, slow in `OPT(∞)`;
//! - `F_big`: members of `F` with `s + t > C^∞/φ`, `F_small` the rest;
//! - `H_slow`: slow in the trace (these may be fast in `OPT(∞)`).

use std::collections::BTreeSet;

use serde::Serialize;

use crate::exactnum::QNum;
use crate::model::{trace_makespan, ModelError, Placement, Tap, Trace};
use crate::offline::{opt, opt_prefix, prefix_table, r_of_table, OptResult};
use crate::scalar::Scalar;

/// Makespan over `OPT(tap).completion`; `1` for an empty TAP.
pub fn competitive_ratio<N: Scalar>(tap: &Tap<N>, trace: &Trace<N>) -> Result<N, ModelError> {
    if tap.is_empty() {
        return Ok(N::one());
    }
    let makespan = trace_makespan(trace)?;
    let c = opt(tap).completion;
    assert!(!c.is_zero_value(), "non-empty TAP with zero optimal completion");
    Ok(makespan.over(&c))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SetClassification {
    pub actual: BTreeSet<usize>,
    pub fake: BTreeSet<usize>,
    pub fake_big: BTreeSet<usize>,
    pub fake_small: BTreeSet<usize>,
    pub h_slow: BTreeSet<usize>,
}

/// Splits the tasks of `trace` into the sets above. Tasks the trace never
/// starts appear in none of them.
pub fn classify<N: Scalar>(tap: &Tap<N>, trace: &Trace<N>) -> SetClassification {
    classify_with(tap, trace, &opt(tap))
}

fn classify_with<N: Scalar>(tap: &Tap<N>, trace: &Trace<N>, full: &OptResult<N>) -> SetClassification {
    let bound = full.completion.over(&N::phi());
    let mut out = SetClassification::default();
    for (id, placement) in trace.placements(tap.len()).into_iter().enumerate() {
        match placement {
            None => {}
            Some(Placement::Slow) => {
                out.h_slow.insert(id);
            }
            Some(Placement::Fast) if full.plan.is_fast(id) => {
                out.actual.insert(id);
            }
            Some(Placement::Fast) => {
                out.fake.insert(id);
                if tap.task(id).largeness().gt(&bound) {
                    out.fake_big.insert(id);
                } else {
                    out.fake_small.insert(id);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lemma {
    /// Slow placements of prefix optima persist as more tasks arrive.
    SlowPersists,
    /// Every task of `A ∪ F` is fast in the optimum of its own arrival prefix.
    FastAtArrival,
    /// Size bounds on `F_small`, `F_big` and `A`.
    SetBounds,
    /// Every task of `F` arrives strictly before `R(C^∞/φ)`.
    EarlyFake,
    /// `Σ_α + Σ_β < C^∞/φ`.
    StandbyLoad,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub tasks: Vec<usize>,
    /// Exact times, exactnum encoding.
    pub times: Vec<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaOutcome {
    pub lemma: Lemma,
    pub passed: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub header: String,
    /// `C^∞` in exactnum encoding.
    pub completion: String,
    pub completion_approx: f64,
    pub outcomes: Vec<LemmaOutcome>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LemmaOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\nC^inf = {} (~{:.10})\n", self.header, self.completion, self.completion_approx);
        for o in &self.outcomes {
            out.push_str(&format!("{:?}: {}\n", o.lemma, if o.passed { "pass" } else { "FAIL" }));
            if let Some(w) = &o.witness {
                out.push_str(&format!("  tasks {:?} times {:?}: {}\n", w.tasks, w.times, w.detail));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LemmaOptions {
    pub standby_load: bool,
}

const HEADER: &str = "OPT ties broken toward the maximal slow set; \
                      boundary tasks with s + t = C^inf count as slow in OPT(inf)";

fn outcome(lemma: Lemma, witness: Option<Witness>) -> LemmaOutcome {
    LemmaOutcome { lemma, passed: witness.is_none(), witness }
}

fn witness(tasks: Vec<usize>, times: Vec<String>, detail: String) -> Option<Witness> {
    Some(Witness { tasks, times, detail })
}

/// Checks the structural lemmas on an H trace (exact mode).
pub fn check_lemmas(tap: &Tap<QNum>, trace: &Trace<QNum>, options: LemmaOptions) -> LemmaReport {
    let full = opt(tap);
    let c = full.completion.clone();
    let sets = classify_with(tap, trace, &full);
    let table = prefix_table(tap);
    let phi = QNum::phi();
    let c_phi = &c / &phi;
    let c_phi2 = &c_phi / &phi;

    let mut outcomes = Vec::new();

    // slow placements persist across consecutive prefixes
    let mut slow_persists = None;
    for pair in table.windows(2) {
        let (t1, p1) = &pair[0];
        let (t2, p2) = &pair[1];
        if let Some(id) = p1.plan.slow_ids().find(|&id| !p2.plan.is_slow(id)) {
            slow_persists = witness(
                vec![id],
                vec![t1.to_string(), t2.to_string()],
                format!("slow in OPT({t1}) but fast in OPT({t2})"),
            );
            break;
        }
    }
    outcomes.push(outcome(Lemma::SlowPersists, slow_persists));

    let fast_at_arrival = sets.actual.iter().chain(&sets.fake).copied().find_map(|id| {
        let t = &tap.task(id).t;
        let at = opt_prefix(tap, t);
        at.plan.is_slow(id).then(|| Witness {
            tasks: vec![id],
            times: vec![t.to_string()],
            detail: "slow in OPT at its arrival".into(),
        })
    });
    outcomes.push(outcome(Lemma::FastAtArrival, fast_at_arrival));

    let mut set_bounds = None;
    for &m in &sets.fake_small {
        let task = tap.task(m);
        if task.largeness() > c_phi || task.f > c_phi2 {
            set_bounds = witness(vec![m], vec![], format!("F_small task violates s+t <= {c_phi} or f <= {c_phi2}"));
            break;
        }
    }
    if set_bounds.is_none() {
        for &b in &sets.fake_big {
            let task = tap.task(b);
            let l = task.largeness();
            if l <= c_phi || l > c || task.f > c_phi {
                set_bounds = witness(vec![b], vec![], "F_big task outside (C/φ, C] or f > C/φ".into());
                break;
            }
        }
    }
    if set_bounds.is_none() {
        if let Some(&a) = sets.actual.iter().find(|&&a| tap.task(a).largeness() <= c) {
            set_bounds = witness(vec![a], vec![], "A task with s+t <= C".into());
        }
    }
    outcomes.push(outcome(Lemma::SetBounds, set_bounds));

    let r = r_of_table(&table, &c_phi);
    let early_fake = sets.fake.iter().copied().find_map(|id| {
        let t = &tap.task(id).t;
        let late = r.as_ref().is_some_and(|r| t >= r);
        late.then(|| Witness {
            tasks: vec![id],
            times: vec![t.to_string(), r.as_ref().map_or("none".into(), |r| r.to_string())],
            detail: "F task arrives at or after R(C/φ)".into(),
        })
    });
    outcomes.push(outcome(Lemma::EarlyFake, early_fake));

    if options.standby_load {
        outcomes.push(outcome(Lemma::StandbyLoad, standby_load(tap, trace, &sets, r.as_ref(), &c_phi)));
    }

    LemmaReport { header: HEADER.into(), completion: c.to_string(), completion_approx: c.to_f64(), outcomes }
}

fn standby_load(
    tap: &Tap<QNum>,
    trace: &Trace<QNum>,
    sets: &SetClassification,
    r: Option<&QNum>,
    c_phi: &QNum,
) -> Option<Witness> {
    // τ_l: last task arriving strictly before R(C/φ)
    let last = tap.tasks().iter().rfind(|task| r.is_none_or(|r| &task.t < r))?;
    let t_l = &last.t;
    let on_standby = |id: usize| trace.start_time(id).is_none_or(|s| s >= t_l);
    let mut members = Vec::new();
    let mut total = QNum::zero();
    for task in tap.tasks().iter().filter(|task| &task.t <= t_l && on_standby(task.id)) {
        if sets.actual.contains(&task.id) || sets.fake_big.contains(&task.id) {
            members.push(task.id);
            total = total + &task.f;
        }
    }
    (&total >= c_phi).then(|| Witness {
        tasks: members,
        times: vec![t_l.to_string()],
        detail: format!("standby load {total} >= C/φ"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::build_lb_tap;
    use crate::engine::simulate;
    use crate::engine::CommitmentModel;
    use crate::schedulers::{HPolicy, KeepFast};

    fn q(s: &str) -> QNum {
        s.parse().unwrap()
    }

    fn tap(items: &[(&str, &str, &str)]) -> Tap {
        Tap::new(items.iter().map(|(f, s, t)| (q(f), q(s), q(t)))).unwrap()
    }

    fn h_trace(t: &Tap) -> Trace {
        simulate(t, HPolicy::new(), CommitmentModel::Eventual).unwrap()
    }

    #[test]
    fn ratios() {
        let t = tap(&[("10", "100", "0")]);
        assert_eq!(competitive_ratio(&t, &h_trace(&t)).unwrap(), QNum::phi());
        let t = tap(&[("1", "1", "0")]);
        assert_eq!(competitive_ratio(&t, &h_trace(&t)).unwrap(), q("1"));
        let lb = build_lb_tap(10).unwrap();
        let trace = simulate(&lb, KeepFast, CommitmentModel::Never).unwrap();
        assert_eq!(competitive_ratio(&lb, &trace).unwrap(), q("43/30"));
        assert_eq!(competitive_ratio(&Tap::<QNum>::empty(), &Trace::new()).unwrap(), q("1"));
    }

    #[test]
    fn tight_instance_is_actual() {
        let t = tap(&[("10", "100", "0")]);
        let sets = classify(&t, &h_trace(&t));
        assert_eq!(sets.actual, BTreeSet::from([0]));
        assert!(sets.fake.is_empty());
        assert!(check_lemmas(&t, &h_trace(&t), LemmaOptions { standby_load: true }).all_passed());
    }

    #[test]
    fn fake_big_example() {
        let t = tap(&[("1", "3", "0"), ("3", "100", "0.7")]);
        let trace = h_trace(&t);
        assert_eq!(opt(&t).completion, q("3.7"));
        assert_eq!(trace.start_time(0), Some(&(q("1") / QNum::phi())));
        let sets = classify(&t, &trace);
        assert_eq!(sets.fake, BTreeSet::from([0]));
        assert_eq!(sets.fake_big, BTreeSet::from([0]));
        assert_eq!(sets.actual, BTreeSet::from([1]));
        let report = check_lemmas(&t, &trace, LemmaOptions { standby_load: true });
        assert!(report.all_passed(), "{}", report.to_text());
        assert_eq!(r_of_table(&prefix_table(&t), &(q("3.7") / QNum::phi())), Some(q("0.7")));
    }

    #[test]
    fn empty_sets() {
        let sets = classify(&Tap::<QNum>::empty(), &Trace::new());
        assert_eq!(sets, SetClassification::default());
        assert!(check_lemmas(&Tap::empty(), &Trace::new(), LemmaOptions { standby_load: true }).all_passed());
    }

    #[test]
    fn forged_trace_fails_set_bounds() {
        // f = 5 exceeds C/φ² for C = 10
        let t = tap(&[("10", "100", "0"), ("5", "5", "0")]);
        let mut trace = Trace::new();
        trace.push(q("0"), crate::model::EventKind::Arrive, 0);
        trace.push(q("0"), crate::model::EventKind::Arrive, 1);
        trace.push(q("0"), crate::model::EventKind::StartFast, 1);
        trace.push(q("5"), crate::model::EventKind::FinishFast, 1);
        trace.push(q("5"), crate::model::EventKind::StartFast, 0);
        trace.push(q("15"), crate::model::EventKind::FinishFast, 0);
        let report = check_lemmas(&t, &trace, LemmaOptions::default());
        assert!(!report.all_passed());
        let failed: Vec<_> = report.failures().map(|o| o.lemma).collect();
        assert!(failed.contains(&Lemma::FastAtArrival));
        assert!(failed.contains(&Lemma::SetBounds));
        assert!(report.to_json().contains("\"passed\": false"));
    }
}
