//! Cross-judge specificity statistics, paired significance tests and
//! inter-rater agreement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_RESAMPLES: usize = 10_000;
/// Largest sample size for which the Wilcoxon null is enumerated exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("score matrix needs at least 2 judges, got {0}")]
    TooFewJudges(usize),
    #[error("score matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("score matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("no differences supplied")]
    Empty,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 paired items, got {0}")]
    TooFewItems(usize),
    #[error("resamples must be positive")]
    NoResamples,
    #[error("agreement table is empty")]
    EmptyTable,
    #[error("per-item scores given for {got} judges, matrix has {expected}")]
    ItemsMismatch { expected: usize, got: usize },
}

/// Entry `(k, j)` is the score of the model personalized to judge `k` on the
/// test set of judge `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub judges: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub metric_name: String,
    pub higher_is_better: bool,
}

impl ScoreMatrix {
    pub fn validate(&self) -> Result<(), StatsError> {
        let j = self.values.len();
        if j < 2 || self.judges.len() < 2 {
            return Err(StatsError::TooFewJudges(j.min(self.judges.len())));
        }
        for (row, r) in self.values.iter().enumerate() {
            if r.len() != j || self.judges.len() != j {
                return Err(StatsError::NotSquare {
                    rows: j,
                    row,
                    len: r.len(),
                });
            }
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(StatsError::NonFinite { row, col });
            }
        }
        Ok(())
    }
}

/// `r_jj - mean_{k != j} r_kj` per test set `j`, oriented so a positive gap
/// always favours the matched model.
pub fn centered_gaps(m: &ScoreMatrix) -> Result<Vec<f64>, StatsError> {
    m.validate()?;
    let j_count = m.values.len();
    let sign = if m.higher_is_better { 1.0 } else { -1.0 };
    Ok((0..j_count)
        .map(|j| {
            let others: f64 = (0..j_count).filter(|&k| k != j).map(|k| m.values[k][j]).sum();
            sign * (m.values[j][j] - others / (j_count - 1) as f64)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
    /// Set when every difference was zero.
    pub degenerate: bool,
}

/// Average ranks of `|d|`, doubled so tied ranks stay integral.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) hold ranks i+1..=j+1; doubled average is i+j+2
        for &idx in &order[i..=j] {
            ranks[idx] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

fn nonzero(deltas: &[f64]) -> Result<Option<Vec<f64>>, StatsError> {
    if deltas.is_empty() {
        return Err(StatsError::Empty);
    }
    let d: Vec<f64> = deltas.iter().copied().filter(|x| *x != 0.0).collect();
    Ok((!d.is_empty()).then_some(d))
}

fn degenerate() -> WilcoxonResult {
    WilcoxonResult {
        statistic: 0.0,
        w_plus: 0.0,
        n: 0,
        p_value: 1.0,
        exact: true,
        degenerate: true,
    }
}

/// Exact two-sided p from all `2^n` sign assignments. Meant for small `n`.
pub fn wilcoxon_exact(deltas: &[f64]) -> Result<WilcoxonResult, StatsError> {
    let Some(d) = nonzero(deltas)? else {
        return Ok(degenerate());
    };
    let n = d.len();
    assert!(n < 31, "exact enumeration is limited to small samples");
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let total: u64 = ranks.iter().sum();
    let w_plus2: u64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let s: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if s <= w_plus2 {
            le += 1;
        }
        if s >= w_plus2 {
            ge += 1;
        }
    }
    let count = (1u64 << n) as f64;
    let p = (2.0 * le.min(ge) as f64 / count).min(1.0);
    let w_plus = w_plus2 as f64 / 2.0;
    let w_minus = (total - w_plus2) as f64 / 2.0;
    Ok(WilcoxonResult {
        statistic: w_plus.min(w_minus),
        w_plus,
        n,
        p_value: p,
        exact: true,
        degenerate: false,
    })
}

/// Normal approximation with tie-corrected variance and continuity correction.
pub fn wilcoxon_normal(deltas: &[f64]) -> Result<WilcoxonResult, StatsError> {
    let Some(d) = nonzero(deltas)? else {
        return Ok(degenerate());
    };
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let total: u64 = ranks.iter().sum();
    let w_plus2: u64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let w_plus = w_plus2 as f64 / 2.0;
    let w_minus = (total - w_plus2) as f64 / 2.0;

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (2.0 * (1.0 - normal.cdf(z))).min(1.0)
    };
    Ok(WilcoxonResult {
        statistic: w_plus.min(w_minus),
        w_plus,
        n,
        p_value: p,
        exact: false,
        degenerate: false,
    })
}

/// Paired Wilcoxon signed-rank test. Exact zeros are dropped; exact null for
/// up to 12 non-zero differences, normal approximation beyond.
pub fn wilcoxon_signed_rank(deltas: &[f64]) -> Result<WilcoxonResult, StatsError> {
    let nz = deltas.iter().filter(|x| **x != 0.0).count();
    if nz <= WILCOXON_EXACT_MAX_N {
        wilcoxon_exact(deltas)
    } else {
        wilcoxon_normal(deltas)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mean_gap: f64,
    pub p_value: f64,
    pub resamples: usize,
}

/// Item-level paired bootstrap of the mean gap `matched - other`. The
/// two-sided p is twice the smaller share of resampled means on either side
/// of zero. Resample `b` draws from ChaCha stream `b` of the seed, so
/// results do not depend on thread count.
pub fn paired_bootstrap(
    matched: &[f64],
    other: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<BootstrapResult, StatsError> {
    if matched.len() != other.len() {
        return Err(StatsError::LengthMismatch(matched.len(), other.len()));
    }
    let n = matched.len();
    if n < 2 {
        return Err(StatsError::TooFewItems(n));
    }
    if resamples == 0 {
        return Err(StatsError::NoResamples);
    }
    let gaps: Vec<f64> = matched.iter().zip(other).map(|(m, o)| m - o).collect();
    let mean_gap = gaps.iter().sum::<f64>() / n as f64;
    let (le, ge) = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut sum = 0.0;
            for _ in 0..n {
                sum += gaps[rng.gen_range(0..n)];
            }
            let m = sum / n as f64;
            (usize::from(m <= 0.0), usize::from(m >= 0.0))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let p_value = (2.0 * le.min(ge) as f64 / resamples as f64).min(1.0);
    Ok(BootstrapResult {
        mean_gap,
        p_value,
        resamples,
    })
}

/// Two raters, binary labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub both_yes: u64,
    pub both_no: u64,
    pub yes_no: u64,
    pub no_yes: u64,
}

impl AgreementTable {
    pub fn total(&self) -> u64 {
        self.both_yes + self.both_no + self.yes_no + self.no_yes
    }

    pub fn from_labels(a: &[bool], b: &[bool]) -> Result<Self, StatsError> {
        if a.len() != b.len() {
            return Err(StatsError::LengthMismatch(a.len(), b.len()));
        }
        let mut t = AgreementTable {
            both_yes: 0,
            both_no: 0,
            yes_no: 0,
            no_yes: 0,
        };
        for (x, y) in a.iter().zip(b) {
            match (x, y) {
                (true, true) => t.both_yes += 1,
                (false, false) => t.both_no += 1,
                (true, false) => t.yes_no += 1,
                (false, true) => t.no_yes += 1,
            }
        }
        Ok(t)
    }
}

/// Gwet's AC1. The chance term `2π(1-π)` never exceeds 0.5, so the
/// denominator is always positive.
pub fn gwet_ac1(t: &AgreementTable) -> Result<f64, StatsError> {
    let n = t.total();
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }
    let n = n as f64;
    let pa = (t.both_yes + t.both_no) as f64 / n;
    let yes_a = (t.both_yes + t.yes_no) as f64 / n;
    let yes_b = (t.both_yes + t.no_yes) as f64 / n;
    let pi = (yes_a + yes_b) / 2.0;
    let pe = 2.0 * pi * (1.0 - pi);
    Ok((pa - pe) / (1.0 - pe))
}

/// Per-item scores on one judge's test set: the matched model, and the mean
/// of the other judges' models on the same items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeItemScores {
    pub matched: Vec<f64>,
    pub other: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub metric: String,
    pub higher_is_better: bool,
    pub judges: Vec<String>,
    pub deltas: Vec<f64>,
    pub p_values: Vec<f64>,
    pub significant: Vec<bool>,
    pub mean_gap: f64,
    pub fraction_significant: f64,
    pub alpha: f64,
}

/// Centered gaps plus a per-judge two-sided bootstrap test of the
/// matched-vs-other gap; a judge is significant when `p < alpha`.
pub fn specificity_report(
    m: &ScoreMatrix,
    items: &[JudgeItemScores],
    resamples: usize,
    seed: u64,
    alpha: f64,
) -> Result<GapResult, StatsError> {
    let deltas = centered_gaps(m)?;
    if items.len() != deltas.len() {
        return Err(StatsError::ItemsMismatch {
            expected: deltas.len(),
            got: items.len(),
        });
    }
    let mut p_values = Vec::with_capacity(items.len());
    let mut significant = Vec::with_capacity(items.len());
    for (j, it) in items.iter().enumerate() {
        let judge_seed = crate::text::derive_seed(seed, &m.judges[j]);
        let res = if m.higher_is_better {
            paired_bootstrap(&it.matched, &it.other, resamples, judge_seed)?
        } else {
            paired_bootstrap(&it.other, &it.matched, resamples, judge_seed)?
        };
        p_values.push(res.p_value);
        significant.push(res.p_value < alpha);
    }
    let j = deltas.len() as f64;
    Ok(GapResult {
        metric: m.metric_name.clone(),
        higher_is_better: m.higher_is_better,
        judges: m.judges.clone(),
        mean_gap: deltas.iter().sum::<f64>() / j,
        fraction_significant: significant.iter().filter(|s| **s).count() as f64 / j,
        deltas,
        p_values,
        significant,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted() -> ScoreMatrix {
        ScoreMatrix {
            judges: vec!["a".into(), "b".into(), "c".into()],
            values: vec![vec![0.9, 0.2, 0.1], vec![0.3, 0.8, 0.2], vec![0.1, 0.3, 0.7]],
            metric_name: "bleu".into(),
            higher_is_better: true,
        }
    }

    #[test]
    fn planted_gaps() {
        let g = centered_gaps(&planted()).unwrap();
        for (got, want) in g.iter().zip([0.7, 0.55, 0.55]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let mut lower = planted();
        lower.higher_is_better = false;
        let flipped = centered_gaps(&lower).unwrap();
        assert!((flipped[0] + 0.7).abs() < 1e-12);
    }

    #[test]
    fn matrix_validation() {
        let mut m = planted();
        m.values[1].pop();
        assert!(matches!(centered_gaps(&m), Err(StatsError::NotSquare { .. })));
        let one = ScoreMatrix {
            judges: vec!["a".into()],
            values: vec![vec![1.0]],
            metric_name: "x".into(),
            higher_is_better: true,
        };
        assert_eq!(centered_gaps(&one), Err(StatsError::TooFewJudges(1)));
    }

    #[test]
    fn wilcoxon_small_cases() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.25).abs() < 1e-12);
        assert!(r.exact);
        let z = wilcoxon_signed_rank(&[0.0, 0.0]).unwrap();
        assert!(z.degenerate);
        assert_eq!(z.p_value, 1.0);
        let sym = wilcoxon_signed_rank(&[0.4, -0.4]).unwrap();
        assert_eq!(sym.p_value, 1.0);
        assert_eq!(wilcoxon_signed_rank(&[]), Err(StatsError::Empty));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(doubled_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![7, 2, 7, 4]);
    }

    #[test]
    fn large_samples_use_normal_path() {
        let d: Vec<f64> = (1..=20).map(f64::from).collect();
        let r = wilcoxon_signed_rank(&d).unwrap();
        assert!(!r.exact);
        assert!(r.p_value < 1e-3);
    }

    #[test]
    fn bootstrap_edges() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let same = paired_bootstrap(&a, &a, 500, 3).unwrap();
        assert_eq!(same.mean_gap, 0.0);
        assert_eq!(same.p_value, 1.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        let sep = paired_bootstrap(&shifted, &a, 500, 3).unwrap();
        assert_eq!(sep.p_value, 0.0);
        assert!(paired_bootstrap(&[1.0], &[2.0], 10, 0).is_err());
        assert!(paired_bootstrap(&[1.0, 2.0], &[2.0], 10, 0).is_err());
        assert!(paired_bootstrap(&a, &a, 0, 0).is_err());
    }

    #[test]
    fn bootstrap_is_seed_deterministic() {
        let m = vec![0.3, 0.1, 0.4, 0.15, 0.9, 0.26];
        let o = vec![0.2, 0.2, 0.3, 0.1, 0.5, 0.3];
        let a = paired_bootstrap(&m, &o, 2000, 42).unwrap();
        let b = paired_bootstrap(&m, &o, 2000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ac1_cases() {
        let t = AgreementTable {
            both_yes: 40,
            both_no: 40,
            yes_no: 10,
            no_yes: 10,
        };
        assert!((gwet_ac1(&t).unwrap() - 0.6).abs() < 1e-12);
        let perfect = AgreementTable {
            both_yes: 30,
            both_no: 5,
            yes_no: 0,
            no_yes: 0,
        };
        assert_eq!(gwet_ac1(&perfect).unwrap(), 1.0);
        // p_a = p_e = 0.5
        let chance = AgreementTable {
            both_yes: 25,
            both_no: 25,
            yes_no: 25,
            no_yes: 25,
        };
        assert_eq!(gwet_ac1(&chance).unwrap(), 0.0);
        let empty = AgreementTable {
            both_yes: 0,
            both_no: 0,
            yes_no: 0,
            no_yes: 0,
        };
        assert_eq!(gwet_ac1(&empty), Err(StatsError::EmptyTable));
    }

    #[test]
    fn agreement_from_labels() {
        let t = AgreementTable::from_labels(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!((t.both_yes, t.yes_no, t.no_yes, t.both_no), (1, 1, 1, 1));
    }
}
