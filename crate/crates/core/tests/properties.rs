use std::cmp::Ordering;

use ofms_core::engine::{simulate, CommitmentModel, EngineState, SchedulerPolicy, Wakeups};
use ofms_core::model::{check_trace, plan_makespan, Tap};
use ofms_core::offline::{brute_force_opt, opt, opt_prefix};
use ofms_core::{Command, HPolicy, PolicyKind, QNum, Scalar};
use proptest::prelude::*;

fn small_rational() -> impl Strategy<Value = QNum> {
    (-40i64..=40, 1i64..=6).prop_map(|(n, d)| QNum::ratio(n, d))
}

fn field_element() -> impl Strategy<Value = QNum> {
    (small_rational(), small_rational()).prop_map(|(a, b)| a + b * QNum::sqrt5())
}

fn task() -> impl Strategy<Value = (QNum, QNum, u32)> {
    (1i64..=16, prop_oneof![3 => (4i64..=24).prop_map(Some), 1 => Just(None)], 0u32..=6).prop_map(|(f, slow, gap)| {
        let f = QNum::ratio(f, 4);
        let s = match slow {
            // s = f·slowdown/4 with slowdown >= 4 keeps s >= f
            Some(r) => &f * QNum::ratio(r, 4),
            None => QNum::infinity(),
        };
        (f, s, gap)
    })
}

fn tap_strategy(max_n: usize) -> impl Strategy<Value = Tap> {
    prop::collection::vec(task(), 0..=max_n).prop_map(|tasks| {
        let mut t = QNum::zero();
        let triples: Vec<_> = tasks
            .into_iter()
            .map(|(f, s, gap)| {
                t = &t + QNum::ratio(gap as i64, 2);
                (f, s, t.clone())
            })
            .collect();
        Tap::new(triples).unwrap()
    })
}

// sign of a + b√5 for integers, by squaring in i128
fn integer_sign(a: i128, b: i128) -> Ordering {
    match (a.cmp(&0), b.cmp(&0)) {
        (x, Ordering::Equal) => x,
        (Ordering::Equal, y) => y,
        (x, y) if x == y => x,
        // a² = 5b² has no nonzero integer solutions
        (x, _) if a * a > 5 * b * b => x,
        (x, _) => x.reverse(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn field_axioms(x in field_element(), y in field_element(), z in field_element()) {
        prop_assert_eq!(&x + &y, &y + &x);
        prop_assert_eq!(&x * &y, &y * &x);
        prop_assert_eq!((&x + &y) + &z, &x + (&y + &z));
        prop_assert_eq!((&x * &y) * &z, &x * (&y * &z));
        prop_assert_eq!(&x * (&y + &z), &x * &y + &x * &z);
        prop_assert_eq!(&x - &x, QNum::zero());
        if !x.is_zero() {
            prop_assert_eq!(&x * x.recip().unwrap(), QNum::one());
            prop_assert_eq!((&y / &x) * &x, y.clone());
        }
    }

    #[test]
    fn sign_matches_integer_oracle(a in -10_000i64..=10_000, b in -10_000i64..=10_000) {
        let x = QNum::from_parts((a, 1), (b, 1));
        prop_assert_eq!(x.sign(), integer_sign(a as i128, b as i128));
    }

    #[test]
    fn order_agrees_with_approximation(x in field_element(), y in field_element()) {
        let (fx, fy) = (x.to_f64(), y.to_f64());
        if (fx - fy).abs() > 1e-9 {
            prop_assert_eq!(x.cmp(&y), fx.partial_cmp(&fy).unwrap());
        }
    }

    #[test]
    fn display_round_trips(x in field_element()) {
        prop_assert_eq!(x.to_string().parse::<QNum>().unwrap(), x);
    }

    #[test]
    fn opt_matches_brute_force(tap in tap_strategy(8)) {
        let fast = opt(&tap);
        let slow = brute_force_opt(&tap).unwrap();
        prop_assert_eq!(&fast.completion, &slow.completion);
        prop_assert_eq!(plan_makespan(&tap, &fast.plan), fast.completion.clone());
        prop_assert!(fast.plan.slow_ids().all(|id| tap.task(id).s.is_finite()));
    }

    #[test]
    fn prefix_completion_is_monotone(tap in tap_strategy(10)) {
        let mut last = QNum::zero();
        for t in tap.arrival_times() {
            let c = opt_prefix(&tap, &t).completion;
            prop_assert!(c >= last);
            last = c;
        }
        prop_assert_eq!(last, opt(&tap).completion);
    }

    #[test]
    fn slow_placements_persist(tap in tap_strategy(10)) {
        let times = tap.arrival_times();
        for pair in times.windows(2) {
            let (early, late) = (opt_prefix(&tap, &pair[0]), opt_prefix(&tap, &pair[1]));
            for id in early.plan.slow_ids() {
                prop_assert!(late.plan.is_slow(id), "task {} slow at {} but fast at {}", id, pair[0], pair[1]);
            }
        }
    }

    #[test]
    fn h_is_phi_competitive(tap in tap_strategy(10)) {
        let trace = simulate(&tap, HPolicy::new(), CommitmentModel::Eventual).unwrap();
        let ratio = ofms_core::analysis::competitive_ratio(&tap, &trace).unwrap();
        prop_assert!(ratio <= QNum::phi(), "ratio {}", ratio);
    }

    #[test]
    fn every_policy_emits_legal_traces(tap in tap_strategy(10)) {
        for kind in PolicyKind::ALL {
            let trace = simulate(&tap, kind.build::<QNum>(), kind.model()).unwrap();
            prop_assert!(check_trace(&tap, &trace, kind.model()).is_ok(), "{}", kind);
            prop_assert_eq!(trace.truncation(), None);
        }
    }

    #[test]
    fn simulation_is_deterministic(tap in tap_strategy(12)) {
        for kind in PolicyKind::ALL {
            let a = simulate(&tap, kind.build::<QNum>(), kind.model()).unwrap();
            let b = simulate(&tap, kind.build::<QNum>(), kind.model()).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn extra_wakeups_do_not_change_h(tap in tap_strategy(8)) {
        let plain = simulate(&tap, HPolicy::new(), CommitmentModel::Eventual).unwrap();
        let dense = simulate(&tap, DenseWakeups { inner: HPolicy::new(), step: QNum::ratio(1, 8) }, CommitmentModel::Eventual).unwrap();
        prop_assert_eq!(plain, dense);
    }
}

/// H plus a wake-up every `step` time units while anything is pending.
struct DenseWakeups {
    inner: HPolicy<QNum>,
    step: QNum,
}

impl SchedulerPolicy<QNum> for DenseWakeups {
    fn name(&self) -> &str {
        "dense-h"
    }

    fn model(&self) -> CommitmentModel {
        CommitmentModel::Eventual
    }

    fn decide(&mut self, state: &EngineState<QNum>, wakeups: &mut Wakeups<QNum>) -> Command {
        let command = self.inner.decide(state, wakeups);
        if command == Command::Noop && !state.standby().is_empty() {
            wakeups.request(state.now().plus(&self.step));
        }
        command
    }
}

#[test]
fn integer_oracle_examples() {
    assert_eq!(integer_sign(-2, 1), Ordering::Greater);
    assert_eq!(integer_sign(-3, 1), Ordering::Less);
    assert_eq!(integer_sign(3, -1), Ordering::Greater);
    assert_eq!(integer_sign(2, -1), Ordering::Less);
    assert_eq!(integer_sign(0, 0), Ordering::Equal);
}
