//! Fuzz campaigns: generate TAPs, simulate a policy, check the trace, the ratio
//! bound and (for H) the lemma invariants, and shrink failing inputs.

use serde::Serialize;

use crate::analysis::{check_lemmas, competitive_ratio, LemmaOptions};
use crate::engine::simulate;
use crate::exactnum::QNum;
use crate::model::{check_trace, Tap};
use crate::scalar::{near_tie_count, reset_near_ties, Approx, NumericMode, Scalar};
use crate::schedulers::PolicyKind;
use crate::tapgen::{case_seed, random_tap, GenError, GenParams, Style};

/// How a campaign spreads its cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Execution::Parallel;
        #[cfg(not(feature = "parallel"))]
        return Execution::Sequential;
    }
}

/// `f(0), f(1), …, f(count - 1)` in index order.
pub fn map_indices<T, F>(count: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        Execution::Sequential => (0..count).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(f).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzConfig {
    pub seed: u64,
    pub count: usize,
    /// Template; `seed` and `style` are overwritten per case.
    pub params: GenParams,
    /// Case `i` uses `styles[i % len]`.
    pub styles: Vec<Style>,
    /// Case `i` draws `n` uniformly from `1..=params.n` when set.
    pub vary_n: bool,
    pub policy: PolicyKind,
    pub mode: NumericMode,
    pub lemmas: LemmaOptions,
    pub execution: Execution,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seed: 0,
            count: 100,
            params: GenParams::default(),
            styles: vec![Style::Uniform],
            vary_n: false,
            policy: PolicyKind::H,
            mode: NumericMode::Exact,
            lemmas: LemmaOptions::default(),
            execution: Execution::default(),
        }
    }
}

impl FuzzConfig {
    /// Generator parameters for case `index`.
    pub fn case_params(&self, index: usize) -> GenParams {
        let seed = case_seed(self.seed, index as u64);
        let n =
            if self.vary_n && self.params.n > 0 { 1 + (seed >> 40) as usize % self.params.n } else { self.params.n };
        let style = if self.styles.is_empty() { self.params.style } else { self.styles[index % self.styles.len()] };
        GenParams { seed, n, style, ..self.params.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    Simulation(String),
    IllegalTrace(String),
    RatioAbovePhi(String),
    Lemma(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub ratio: f64,
    /// Exact ratio (exactnum encoding) in exact mode.
    pub ratio_exact: Option<String>,
    pub violations: Vec<Violation>,
    pub near_ties: u64,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn evaluate_in<N: Scalar>(tap: &Tap<N>, policy: PolicyKind) -> (Result<(crate::model::Trace<N>, N), Violation>, u64) {
    reset_near_ties();
    let run = (|| {
        let model = policy.model();
        let trace = simulate(tap, policy.build::<N>(), model).map_err(|e| Violation::Simulation(e.kind.to_string()))?;
        check_trace(tap, &trace, model).map_err(|v| Violation::IllegalTrace(v.to_string()))?;
        let ratio = competitive_ratio(tap, &trace).map_err(|e| Violation::IllegalTrace(e.to_string()))?;
        Ok((trace, ratio))
    })();
    (run, near_tie_count())
}

/// Simulates `policy` on `tap` and checks the trace, `ratio <= φ`, and the
/// lemma invariants when `policy` is H in exact mode.
pub fn evaluate(tap: &Tap, policy: PolicyKind, mode: NumericMode, lemmas: LemmaOptions) -> CaseResult {
    match mode {
        NumericMode::Exact => {
            let (run, near_ties) = evaluate_in(tap, policy);
            let (trace, ratio) = match run {
                Ok(ok) => ok,
                Err(v) => return CaseResult { ratio: f64::NAN, ratio_exact: None, violations: vec![v], near_ties },
            };
            let mut violations = Vec::new();
            if ratio > QNum::phi() {
                violations.push(Violation::RatioAbovePhi(ratio.to_string()));
            }
            if policy == PolicyKind::H {
                let report = check_lemmas(tap, &trace, lemmas);
                if !report.all_passed() {
                    violations.push(Violation::Lemma(report.failures().map(|o| format!("{:?}", o.lemma)).collect()));
                }
            }
            CaseResult { ratio: ratio.to_f64(), ratio_exact: Some(ratio.to_string()), violations, near_ties }
        }
        NumericMode::Float => {
            let float_tap: Tap<Approx> = tap.to_float();
            let (run, near_ties) = evaluate_in(&float_tap, policy);
            match run {
                Ok((_, ratio)) => {
                    let violations = if ratio.gt(&Approx::phi()) {
                        vec![Violation::RatioAbovePhi(ratio.to_string())]
                    } else {
                        Vec::new()
                    };
                    CaseResult { ratio: ratio.0, ratio_exact: None, violations, near_ties }
                }
                Err(v) => CaseResult { ratio: f64::NAN, ratio_exact: None, violations: vec![v], near_ties },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub index: usize,
    pub seed: u64,
    pub style: Style,
    pub violations: Vec<Violation>,
    pub tap: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub policy: String,
    pub mode: String,
    pub seed: u64,
    pub count: usize,
    pub failures: Vec<FailureRecord>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
    /// Cases whose float run hit a tolerance-resolved comparison.
    pub near_tie_cases: usize,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn run_campaign(config: &FuzzConfig) -> Result<CampaignReport, GenError> {
    config.params.validate()?;
    let results = map_indices(config.count, config.execution, |i| {
        let params = config.case_params(i);
        let tap = random_tap(&params).expect("validated params");
        let result = evaluate(&tap, config.policy, config.mode, config.lemmas);
        (params, tap, result)
    });

    let ratios: Vec<f64> = results.iter().map(|(_, _, r)| r.ratio).filter(|r| r.is_finite()).collect();
    let failures = results
        .iter()
        .enumerate()
        .filter(|(_, (_, _, r))| !r.passed())
        .map(|(index, (params, tap, r))| FailureRecord {
            index,
            seed: params.seed,
            style: params.style,
            violations: r.violations.clone(),
            tap: tap.to_json(),
        })
        .collect();
    Ok(CampaignReport {
        policy: config.policy.name().to_string(),
        mode: config.mode.to_string(),
        seed: config.seed,
        count: config.count,
        failures,
        min_ratio: ratios.iter().copied().reduce(f64::min),
        max_ratio: ratios.iter().copied().reduce(f64::max),
        mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        near_tie_cases: results.iter().filter(|(_, _, r)| r.near_ties > 0).count(),
    })
}

/// Greedily deletes tasks while `still_fails` holds; the result is 1-minimal.
pub fn minimize_witness<N: Scalar>(tap: &Tap<N>, still_fails: impl Fn(&Tap<N>) -> bool) -> Tap<N> {
    let mut current = tap.clone();
    let mut id = 0;
    while id < current.len() {
        let candidate = current.without(id);
        if still_fails(&candidate) {
            current = candidate;
        } else {
            id += 1;
        }
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_campaign_passes() {
        let config = FuzzConfig { seed: 1, count: 40, ..FuzzConfig::default() };
        let report = run_campaign(&config).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        assert!(report.max_ratio.unwrap() <= 1.618_033_988_75);
        assert!(report.min_ratio.unwrap() >= 1.0);
    }

    #[test]
    fn empty_campaign() {
        let report = run_campaign(&FuzzConfig { count: 0, ..FuzzConfig::default() }).unwrap();
        assert_eq!(report.count, 0);
        assert!(report.passed());
        assert_eq!(report.max_ratio, None);
    }

    #[test]
    fn sequential_matches_default_execution() {
        let base = FuzzConfig { seed: 7, count: 12, styles: Style::ALL.to_vec(), ..FuzzConfig::default() };
        let seq = run_campaign(&FuzzConfig { execution: Execution::Sequential, ..base.clone() }).unwrap();
        assert_eq!(seq, run_campaign(&base).unwrap());
    }

    #[test]
    fn minimizer_keeps_a_needed_task() {
        let tap = random_tap(&GenParams { n: 10, p_infinite_s: 0.0, ..GenParams::default() }).unwrap();
        let big = tap.tasks().iter().map(|t| t.f.clone()).max().unwrap();
        let small = minimize_witness(&tap, |t| t.tasks().iter().any(|x| x.f == big));
        assert_eq!(small.len(), 1);
        assert_eq!(small.task(0).f, big);
    }

    #[test]
    fn float_mode_agrees_on_tight_instance() {
        let tap = Tap::new([(QNum::from_int(10), QNum::from_int(100), QNum::zero())]).unwrap();
        let exact = evaluate(&tap, PolicyKind::H, NumericMode::Exact, LemmaOptions::default());
        let float = evaluate(&tap, PolicyKind::H, NumericMode::Float, LemmaOptions::default());
        assert!(exact.passed() && float.passed());
        assert_eq!(exact.ratio_exact.as_deref(), Some("1/2+1/2*sqrt5"));
        assert!((float.ratio - exact.ratio).abs() < 1e-9);
    }
}
