//! Decision attribution with exact Shapley values, and a mean-shift drift
//! detector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inter::DomainSelection;
use crate::matric::{ScoreTerms, ScoreWeights};

pub const MAX_PLAYERS: usize = 20;
pub const DEFAULT_DRIFT_K: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CognitionError {
    #[error("{0} players exceed the enumeration limit of {MAX_PLAYERS}")]
    TooManyFeatures(usize),
    #[error("empty sample window")]
    EmptyWindow,
}

/// Set function over `n` players, tabulated by bitmask (bit `i` set means
/// player `i` is in the coalition).
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFn {
    n: usize,
    values: Vec<f64>,
}

impl CharacteristicFn {
    pub fn from_fn(n: usize, mut v: impl FnMut(u32) -> f64) -> Result<Self, CognitionError> {
        if n > MAX_PLAYERS {
            return Err(CognitionError::TooManyFeatures(n));
        }
        let values = (0..1u32 << n).map(&mut v).collect();
        Ok(CharacteristicFn { n, values })
    }

    pub fn from_table(values: Vec<f64>) -> Result<Self, CognitionError> {
        let n = values.len().trailing_zeros() as usize;
        if n > MAX_PLAYERS {
            return Err(CognitionError::TooManyFeatures(n));
        }
        assert_eq!(values.len(), 1 << n, "table length must be a power of two");
        Ok(CharacteristicFn { n, values })
    }

    pub fn players(&self) -> usize {
        self.n
    }

    pub fn value(&self, coalition: u32) -> f64 {
        self.values[coalition as usize]
    }

    pub fn grand(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn empty(&self) -> f64 {
        self.values[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
}

impl Attribution {
    pub fn total(&self) -> f64 {
        self.phi.iter().sum()
    }
}

/// `1 / (n · C(n−1, s))`, the Shapley weight of a coalition of size `s`.
fn weights(n: usize) -> Vec<f64> {
    let mut binom = vec![1.0f64; n.max(1)];
    for s in 1..n {
        binom[s] = binom[s - 1] * (n - s) as f64 / s as f64;
    }
    binom.iter().map(|c| 1.0 / (n as f64 * c)).collect()
}

pub fn shapley_exact(cf: &CharacteristicFn) -> Attribution {
    let n = cf.n;
    if n == 0 {
        return Attribution { phi: Vec::new() };
    }
    let w = weights(n);
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        let mut acc = 0.0;
        for s in 0..(1u32 << n) {
            if s & bit == 0 {
                acc += w[s.count_ones() as usize] * (cf.value(s | bit) - cf.value(s));
            }
        }
        *p = acc;
    }
    Attribution { phi }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub decision: String,
    pub features: Vec<String>,
    pub phi: Vec<f64>,
    pub value: f64,
    pub baseline: f64,
    pub report: String,
}

fn render(decision: &str, features: &[String], phi: &[f64], value: f64, baseline: f64) -> String {
    let mut order: Vec<usize> = (0..phi.len()).collect();
    order.sort_by(|&a, &b| {
        phi[b]
            .abs()
            .total_cmp(&phi[a].abs())
            .then_with(|| features[a].cmp(&features[b]))
    });
    let mut out = format!("{decision}: value {value:.6} (baseline {baseline:.6})\n");
    for i in order {
        out.push_str(&format!("  {:<12} {:+.6}\n", features[i], phi[i]));
    }
    out
}

fn explain(decision: &str, features: Vec<String>, cf: &CharacteristicFn) -> Explanation {
    let phi = shapley_exact(cf).phi;
    let report = render(decision, &features, &phi, cf.grand(), cf.empty());
    Explanation {
        decision: decision.to_string(),
        features,
        phi,
        value: cf.grand(),
        baseline: cf.empty(),
        report,
    }
}

/// Attributes an AT score to its latency, capacity and energy terms; a
/// coalition's value is the clamped score with the other terms zeroed.
pub fn explain_at_score(decision: &str, terms: &ScoreTerms, w: &ScoreWeights) -> Explanation {
    let cf = CharacteristicFn::from_fn(3, |mask| terms.score_masked(w, mask))
        .expect("three players");
    explain(decision, ScoreTerms::NAMES.iter().map(|s| s.to_string()).collect(), &cf)
}

/// Attributes a path cost to the domains along the path.
pub fn explain_domain_selection(decision: &str, sel: &DomainSelection) -> Result<Explanation, CognitionError> {
    let terms = &sel.cost_terms;
    let cf = CharacteristicFn::from_fn(terms.len(), |mask| {
        terms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .fold(0.0, |acc, (_, c)| acc + c)
    })?;
    Ok(explain(decision, sel.path.clone(), &cf))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub mean_shift: f64,
    pub threshold: f64,
    pub drifted: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Flags drift when the mean moves by more than `k` population standard
/// deviations of the reference window. A constant reference drifts on any
/// nonzero shift.
pub fn detect_drift(reference: &[f64], current: &[f64], k: f64) -> Result<DriftReport, CognitionError> {
    if reference.is_empty() || current.is_empty() {
        return Err(CognitionError::EmptyWindow);
    }
    let m = mean(reference);
    let var = reference.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / reference.len() as f64;
    let threshold = k * var.sqrt();
    let mean_shift = mean(current) - m;
    Ok(DriftReport {
        mean_shift,
        threshold,
        drifted: mean_shift.abs() > threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Average marginal contribution over all n! join orders.
    fn permutation_oracle(cf: &CharacteristicFn) -> Vec<f64> {
        fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == items.len() {
                out.push(items.clone());
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                permute(items, k + 1, out);
                items.swap(k, i);
            }
        }
        let n = cf.players();
        let mut perms = Vec::new();
        permute(&mut (0..n).collect(), 0, &mut perms);
        let mut phi = vec![0.0; n];
        for p in &perms {
            let mut s = 0u32;
            for &i in p {
                phi[i] += cf.value(s | 1 << i) - cf.value(s);
                s |= 1 << i;
            }
        }
        phi.iter().map(|x| x / perms.len() as f64).collect()
    }

    #[test]
    fn two_player_fixture() {
        let cf = CharacteristicFn::from_table(vec![0.0, 1.0, 3.0, 6.0]).unwrap();
        assert_eq!(shapley_exact(&cf).phi, [2.0, 4.0]);
        assert_eq!(permutation_oracle(&cf), [2.0, 4.0]);
    }

    #[test]
    fn additive_game_returns_weights() {
        let w = [1.5, -2.0, 0.25, 4.0];
        let cf = CharacteristicFn::from_fn(4, |m| (0..4).filter(|i| m & (1 << i) != 0).map(|i| w[i]).sum())
            .unwrap();
        for (phi, wi) in shapley_exact(&cf).phi.iter().zip(w) {
            assert!((phi - wi).abs() < 1e-12);
        }
    }

    #[test]
    fn dummy_player_gets_zero() {
        let cf = CharacteristicFn::from_fn(3, |m| ((m & 0b011).count_ones() as f64).powi(2)).unwrap();
        assert_eq!(shapley_exact(&cf).phi[2], 0.0);
    }

    #[test]
    fn too_many_players() {
        assert_eq!(
            CharacteristicFn::from_fn(21, |_| 0.0).unwrap_err(),
            CognitionError::TooManyFeatures(21)
        );
    }

    proptest! {
        #[test]
        fn efficiency_and_oracle(n in 1usize..=6, seed in prop::collection::vec(-100.0f64..100.0, 64)) {
            let cf = CharacteristicFn::from_fn(n, |m| seed[m as usize]).unwrap();
            let phi = shapley_exact(&cf).phi;
            let total: f64 = phi.iter().sum();
            prop_assert!((total - (cf.grand() - cf.empty())).abs() <= 1e-9);
            for (a, b) in phi.iter().zip(permutation_oracle(&cf)) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn symmetric_players_share_equally(table in prop::collection::vec(-10.0f64..10.0, 4)) {
            // Value depends only on how many of players 0 and 1 are present,
            // plus player 2's membership.
            let cf = CharacteristicFn::from_fn(3, |m| {
                table[(m & 1) as usize + ((m >> 1) & 1) as usize] + if m & 4 != 0 { table[3] } else { 0.0 }
            }).unwrap();
            let phi = shapley_exact(&cf).phi;
            prop_assert_eq!(phi[0], phi[1]);
        }

        #[test]
        fn drift_is_sign_symmetric(
            r in prop::collection::vec(-1e3f64..1e3, 1..30),
            c in prop::collection::vec(-1e3f64..1e3, 1..30),
        ) {
            let a = detect_drift(&r, &c, 3.0).unwrap();
            let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
            let b = detect_drift(&neg(&r), &neg(&c), 3.0).unwrap();
            prop_assert!((a.mean_shift + b.mean_shift).abs() <= 1e-9 * (1.0 + a.mean_shift.abs()));
            prop_assert_eq!(a.drifted, b.drifted);
        }
    }

    #[test]
    fn at_score_with_only_latency() {
        let terms = ScoreTerms { latency: 0.8, capacity: 0.0, energy: 0.0 };
        let w = ScoreWeights::default();
        let e = explain_at_score("select_at f1", &terms, &w);
        assert!((e.phi[0] - 0.4).abs() < 1e-15);
        assert_eq!(&e.phi[1..], [0.0, 0.0]);
        assert_eq!(e.value, 0.4);
        assert!(e.report.lines().nth(1).unwrap().contains("latency"));
    }

    #[test]
    fn zero_weights_zero_attribution() {
        let terms = ScoreTerms { latency: 0.8, capacity: 0.5, energy: 0.3 };
        let w = ScoreWeights { latency: 0.0, capacity: 0.0, energy: 0.0 };
        assert_eq!(explain_at_score("x", &terms, &w).phi, [0.0; 3]);
    }

    #[test]
    fn at_score_matches_subset_definition() {
        let terms = ScoreTerms { latency: 0.6, capacity: 0.9, energy: 0.7 };
        let w = ScoreWeights::default();
        let e = explain_at_score("x", &terms, &w);
        // Definition sum with explicit factorial weights.
        let fact = |k: usize| (1..=k).product::<usize>() as f64;
        for i in 0..3 {
            let mut phi = 0.0;
            for s in 0u32..8 {
                if s & (1 << i) != 0 {
                    continue;
                }
                let k = s.count_ones() as usize;
                let wgt = fact(k) * fact(3 - k - 1) / fact(3);
                phi += wgt * (terms.score_masked(&w, s | 1 << i) - terms.score_masked(&w, s));
            }
            assert!((phi - e.phi[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_selection_costs_are_additive() {
        let sel = DomainSelection {
            path: vec!["a".into(), "b".into()],
            cost: 20.0,
            cost_terms: vec![5.0, 15.0],
        };
        let e = explain_domain_selection("select_domains r1", &sel).unwrap();
        assert_eq!(e.phi, [5.0, 15.0]);
        assert!(e.report.lines().nth(1).unwrap().trim_start().starts_with('b'));
    }

    #[test]
    fn drift_fixtures() {
        let same = [1.0, 2.0, 3.0];
        let r = detect_drift(&same, &same, DEFAULT_DRIFT_K).unwrap();
        assert_eq!((r.mean_shift, r.drifted), (0.0, false));

        let r = detect_drift(&[5.0; 4], &[6.0; 4], 3.0).unwrap();
        assert_eq!((r.threshold, r.drifted), (0.0, true));

        // mean 10, population sd 1
        let r = detect_drift(&[9.0, 11.0, 9.0, 11.0], &[13.0, 15.0], 3.0).unwrap();
        assert_eq!((r.mean_shift, r.threshold, r.drifted), (4.0, 3.0, true));
        let r = detect_drift(&[9.0, 11.0, 9.0, 11.0], &[12.0, 13.0], 3.0).unwrap();
        assert!(!r.drifted);

        assert_eq!(detect_drift(&[], &[1.0], 3.0), Err(CognitionError::EmptyWindow));
    }
}
