//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

// `ensure!` negates float comparisons on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use judgebench::discernment::{
    self, DiscernParams, Label, LabeledSentence, NegativePool, NgramFeaturizer, SettingGroup,
};
use judgebench::gateway::{Gateway, GatewayOptions, MockScript, MockTransport};
use judgebench::metrics::{self, GenerationRecord, Providers, RougeVariant, Task};
use judgebench::pipeline::{self, PipelineConfig, QaPipeline};
use judgebench::retrieval::PairIndex;
use judgebench::stats::{self, AgreementTable, JudgeItemScores, ScoreMatrix};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

// ---- criterion 1 -----------------------------------------------------------

/// Every string of length 1..=8 over {a, b, c}, shortest first.
fn abc_strings() -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = Vec::new();
    let mut layer: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..8 {
        layer = layer
            .iter()
            .flat_map(|s| {
                b"abc".iter().map(move |&c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// LCS by enumeration: every distinct subsequence of each string is looked up
/// in the other string's subsequence set, longest first.
struct SubsequenceOracle {
    /// Per string, indices of its distinct non-empty subsequences, longest first.
    subsequences: Vec<Vec<u32>>,
    /// Per string, a bitset over all strings marking its subsequences.
    members: Vec<Vec<u64>>,
    lengths: Vec<usize>,
}

impl SubsequenceOracle {
    fn new(strings: &[Vec<u8>]) -> Self {
        let index: HashMap<&[u8], u32> = strings
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_slice(), i as u32))
            .collect();
        let words = strings.len().div_ceil(64);
        let mut subsequences = Vec::with_capacity(strings.len());
        let mut members = Vec::with_capacity(strings.len());
        for s in strings {
            let mut set = vec![0u64; words];
            let mut ids = Vec::new();
            for mask in 1u32..(1 << s.len()) {
                let sub: Vec<u8> = (0..s.len()).filter(|i| mask & (1 << i) != 0).map(|i| s[i]).collect();
                let id = index[sub.as_slice()];
                if set[id as usize / 64] & (1 << (id % 64)) == 0 {
                    set[id as usize / 64] |= 1 << (id % 64);
                    ids.push(id);
                }
            }
            ids.sort_by_key(|&id| std::cmp::Reverse(strings[id as usize].len()));
            subsequences.push(ids);
            members.push(set);
        }
        Self {
            subsequences,
            members,
            lengths: strings.iter().map(Vec::len).collect(),
        }
    }

    fn lcs(&self, a: usize, b: usize) -> usize {
        let set = &self.members[b];
        self.subsequences[a]
            .iter()
            .find(|&&id| set[id as usize / 64] & (1 << (id % 64)) != 0)
            .map_or(0, |&id| self.lengths[id as usize])
    }
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let strings = abc_strings();
    let oracle = SubsequenceOracle::new(&strings);
    let tokens: Vec<Vec<String>> = strings
        .iter()
        .map(|s| s.iter().map(|&c| (c as char).to_string()).collect())
        .collect();
    let refs: Vec<Vec<&str>> = tokens.iter().map(|t| t.iter().map(String::as_str).collect()).collect();
    // reference side outermost so its bitset stays in cache
    let mismatch = (0..strings.len()).into_par_iter().find_map_any(|b| {
        (0..strings.len()).find_map(|a| {
            let lcs = oracle.lcs(a, b);
            let want = 2.0 * lcs as f64 / (strings[a].len() + strings[b].len()) as f64;
            let got = metrics::rouge_tokens(&refs[a], &refs[b], RougeVariant::L);
            (!close(got, want, 1e-12)).then_some((a, b, got, want))
        })
    });
    if let Some((a, b, got, want)) = mismatch {
        return Err(format!(
            "ROUGE-L {got} != oracle {want} for {:?} vs {:?}",
            String::from_utf8_lossy(&strings[a]),
            String::from_utf8_lossy(&strings[b])
        ));
    }
    let pairs = strings.len() * strings.len();
    let exhaustive = started.elapsed();
    // the string entry point agrees with the token path
    for a in (0..strings.len()).step_by(7) {
        for b in (0..strings.len()).step_by(13) {
            let (sa, sb) = (refs[a].join(" "), refs[b].join(" "));
            let got = metrics::rouge(&sa, &sb, RougeVariant::L).map_err(|e| e.to_string())?;
            ensure!(
                got == metrics::rouge_tokens(&refs[a], &refs[b], RougeVariant::L),
                "string and token ROUGE-L disagree on {sa:?} vs {sb:?}"
            );
        }
    }

    let bleu = metrics::bleu("a b c d", "a b c d e").map_err(|e| e.to_string())?;
    ensure!(close(bleu, 77.88, 0.01), "BLEU hand case {bleu}");
    let jsd = metrics::jsd(&[1.0, 0.0], &[0.5, 0.5]).map_err(|e| e.to_string())?;
    let kl = |p: [f64; 2], q: [f64; 2]| -> f64 {
        p.iter()
            .zip(q)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| x * (x / y).log2())
            .sum()
    };
    let m = [0.75, 0.25];
    let jsd_oracle = 0.5 * kl([1.0, 0.0], m) + 0.5 * kl([0.5, 0.5], m);
    ensure!(close(jsd, 0.3113, 0.0005), "JSD hand case {jsd}");
    ensure!(close(jsd, jsd_oracle, 1e-12), "JSD {jsd} vs KL oracle {jsd_oracle}");
    let e = metrics::greedy_match(&[vec![1.0, 0.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]]).map_err(|e| e.to_string())?;
    ensure!(close(e.f, 0.6667, 0.0001), "embed_f hand case {}", e.f);
    ensure!(
        close(e.precision, 1.0, 1e-12) && close(e.recall, 0.5, 1e-12),
        "embed P/R {e:?}"
    );
    ensure!(
        exhaustive < Duration::from_secs(10),
        "values all match (ROUGE-L = LCS oracle on {} pairs, BLEU {bleu:.2}, JSD {jsd:.4}, embed_f {:.4}) \
         but the exhaustive check took {:.1}s on {} thread(s), over the 10s budget",
        pairs,
        e.f,
        exhaustive.as_secs_f64(),
        rayon::current_num_threads()
    );
    Ok(format!(
        "ROUGE-L = LCS oracle on {pairs} pairs in {:.1}s; BLEU {bleu:.2}; JSD {jsd:.4}; embed_f {:.4}",
        exhaustive.as_secs_f64(),
        e.f
    ))
}

// ---- criterion 2 -----------------------------------------------------------

fn matrix(values: Vec<Vec<f64>>, higher_is_better: bool) -> ScoreMatrix {
    ScoreMatrix {
        judges: (0..values.len()).map(|i| format!("j{i}")).collect(),
        values,
        metric_name: "m".into(),
        higher_is_better,
    }
}

fn criterion_2() -> Outcome {
    let planted = matrix(
        vec![vec![0.9, 0.2, 0.1], vec![0.3, 0.8, 0.2], vec![0.1, 0.3, 0.7]],
        true,
    );
    let d = stats::centered_gaps(&planted).map_err(|e| e.to_string())?;
    for (got, want) in d.iter().zip([0.7, 0.55, 0.55]) {
        ensure!(close(*got, want, 1e-12), "planted gap {got} != {want}");
    }
    for j in 2..=6 {
        for hib in [true, false] {
            let d = stats::centered_gaps(&matrix(vec![vec![0.37; j]; j], hib)).map_err(|e| e.to_string())?;
            ensure!(d.iter().all(|x| x.abs() < 1e-12), "constant {j}x{j} matrix gave {d:?}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..1000 {
        let j = rng.gen_range(2..=8);
        let values: Vec<Vec<f64>> = (0..j)
            .map(|_| (0..j).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let hib = rng.gen_bool(0.5);
        let base = stats::centered_gaps(&matrix(values.clone(), hib)).map_err(|e| e.to_string())?;
        let shifts: Vec<f64> = (0..j).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let shifted: Vec<Vec<f64>> = values
            .iter()
            .map(|row| row.iter().zip(&shifts).map(|(v, s)| v + s).collect())
            .collect();
        let moved = stats::centered_gaps(&matrix(shifted, hib)).map_err(|e| e.to_string())?;
        for (x, y) in base.iter().zip(&moved) {
            ensure!(
                close(*x, *y, 1e-9),
                "column shift changed a gap in matrix {trial}: {x} vs {y}"
            );
        }
    }
    Ok("planted (0.7, 0.55, 0.55); constant matrices give 0; column-shift invariant on 1000 matrices".into())
}

// ---- criterion 3 -----------------------------------------------------------

fn criterion_3() -> Outcome {
    let w = stats::wilcoxon_exact(&[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    ensure!(close(w.p_value, 0.25, 1e-12), "exact p for (1,2,3) = {}", w.p_value);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let shift = rng.gen_range(-1.0..1.0);
        let dist = Normal::new(shift, 1.0).unwrap();
        let d: Vec<f64> = (0..12).map(|_| dist.sample(&mut rng)).collect();
        let exact = stats::wilcoxon_exact(&d).map_err(|e| e.to_string())?;
        let normal = stats::wilcoxon_normal(&d).map_err(|e| e.to_string())?;
        worst = worst.max((exact.p_value - normal.p_value).abs());
    }
    ensure!(worst <= 0.02, "max |exact - normal| at n=12 is {worst:.4}");
    Ok(format!(
        "exact p(1,2,3) = 0.25; max |exact - normal| over 200 fixtures = {worst:.4}"
    ))
}

// ---- criterion 4 -----------------------------------------------------------

fn null_rejection_rate(items: usize, trials: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.5, 0.1).unwrap();
    let mut rejected = 0;
    for t in 0..trials {
        let matched: Vec<f64> = (0..items).map(|_| dist.sample(&mut rng)).collect();
        let other: Vec<f64> = (0..items).map(|_| dist.sample(&mut rng)).collect();
        let r = stats::paired_bootstrap(&matched, &other, 10_000, seed ^ t as u64).map_err(|e| e.to_string())?;
        if r.p_value < 0.05 {
            rejected += 1;
        }
    }
    Ok(rejected as f64 / trials as f64)
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let rate = null_rejection_rate(50, 500, 4)?;
    let null_time = started.elapsed();
    ensure!(
        close(rate, 0.05, 0.02),
        "null rejection rate {rate:.3} (50 items, 500 trials)"
    );
    ensure!(
        null_time < Duration::from_secs(120),
        "null calibration took {:.1}s",
        null_time.as_secs_f64()
    );

    let judges = 10;
    let items = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let base: Vec<f64> = (0..judges).map(|_| rng.gen_range(0.2..0.4)).collect();
    // scores[k][j][i]: model k on item i of judge j
    let scores: Vec<Vec<Vec<f64>>> = (0..judges)
        .map(|k| {
            (0..judges)
                .map(|j| {
                    let mean = base[j] + if k == j { 0.5 } else { 0.0 };
                    let dist = Normal::new(mean, 0.05).unwrap();
                    (0..items).map(|_| dist.sample(&mut rng)).collect()
                })
                .collect()
        })
        .collect();
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let m = matrix(
        (0..judges)
            .map(|k| (0..judges).map(|j| avg(&scores[k][j])).collect())
            .collect(),
        true,
    );
    let per_item: Vec<JudgeItemScores> = (0..judges)
        .map(|j| JudgeItemScores {
            matched: scores[j][j].clone(),
            other: (0..items)
                .map(|i| (0..judges).filter(|&k| k != j).map(|k| scores[k][j][i]).sum::<f64>() / (judges - 1) as f64)
                .collect(),
        })
        .collect();
    let report = stats::specificity_report(&m, &per_item, 10_000, 45, 0.05).map_err(|e| e.to_string())?;
    ensure!(
        report.fraction_significant == 1.0,
        "planted advantage detected for {:.0}% of judges",
        100.0 * report.fraction_significant
    );
    Ok(format!(
        "null rate {rate:.3} (500 trials, 50 items, {:.1}s); planted +0.5 detected for 100% of {judges} judges (mean gap {:.3})",
        null_time.as_secs_f64(),
        report.mean_gap
    ))
}

// ---- criterion 5 -----------------------------------------------------------

fn criterion_5() -> Outcome {
    let t = AgreementTable {
        both_yes: 40,
        both_no: 40,
        yes_no: 10,
        no_yes: 10,
    };
    let ac1 = stats::gwet_ac1(&t).map_err(|e| e.to_string())?;
    ensure!(close(ac1, 0.6, 1e-12), "AC1(40,40,10,10) = {ac1}");
    for (yes, no) in [(30, 70), (100, 0), (0, 5)] {
        let perfect = AgreementTable {
            both_yes: yes,
            both_no: no,
            yes_no: 0,
            no_yes: 0,
        };
        let v = stats::gwet_ac1(&perfect).map_err(|e| e.to_string())?;
        ensure!(close(v, 1.0, 1e-12), "perfect agreement ({yes},{no}) gave {v}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..1000 {
        let t = AgreementTable {
            both_yes: rng.gen_range(0..60),
            both_no: rng.gen_range(0..60),
            yes_no: rng.gen_range(0..60),
            no_yes: rng.gen_range(0..60) + 1,
        };
        let v = stats::gwet_ac1(&t).map_err(|e| e.to_string())?;
        ensure!((-1.0..=1.0).contains(&v), "AC1 {v} out of range for {t:?}");
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(format!(
        "AC1(40,40,10,10) = {ac1:.6}; perfect = 1; 1000 random tables in [{lo:.3}, {hi:.3}]"
    ))
}

// ---- criterion 6 -----------------------------------------------------------

fn pairs_bytes(pairs: &[pipeline::InstructionPair]) -> Vec<u8> {
    let mut buf = Vec::new();
    pipeline::write_pairs_jsonl(&mut buf, pairs).unwrap();
    buf
}

fn criterion_6() -> Outcome {
    let docs = vec![
        fixture_doc(),
        doc("judge_a", "case_2", &format!("פתיח. {S2} {S1}")),
        doc("judge_b", "case_3", &format!("רקע. {S3} {S1}")),
    ];
    let (gw, _) = gateway(fixture_script(&["1"]), None);
    let (_, report) = QaPipeline::new(&gw, PipelineConfig::default()).run(&docs);
    let mut groups: Vec<_> = report.per_judge.values().collect();
    groups.push(&report.totals);
    for c in groups {
        ensure!(
            c.extracted >= c.reasoning_valid
                && c.reasoning_valid >= c.questions_generated
                && c.questions_generated >= c.pairs_valid,
            "stage counts not monotone: {c:?}"
        );
    }
    ensure!(report.totals.pairs_valid > 0, "fixture produced no pairs");

    let (gw, mock) = gateway(fixture_script(&["0"]), None);
    let (pairs, rejected) = QaPipeline::new(&gw, PipelineConfig::default()).run(&[fixture_doc()]);
    let checks = mock.chat_log().iter().filter(|r| r.purpose == "validate_pair").count();
    ensure!(
        pairs.is_empty() && rejected.totals.discarded == 2 && checks == 4,
        "double validation failure: {} pair(s) kept, {} discarded, {checks} checks",
        pairs.len(),
        rejected.totals.discarded
    );

    let cache = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (gw, _) = gateway(fixture_script(&["1"]), Some(cache.path()));
    let (cold_pairs, cold_report) = QaPipeline::new(&gw, PipelineConfig::default()).run(&docs);
    let (gw, warm) = gateway(fixture_script(&["1"]), Some(cache.path()));
    let (warm_pairs, warm_report) = QaPipeline::new(&gw, PipelineConfig::default()).run(&docs);
    ensure!(warm.calls() == 0, "warm rerun made {} call(s)", warm.calls());
    ensure!(gw.stats().network_attempts == 0, "warm rerun made network attempts");
    ensure!(
        pairs_bytes(&cold_pairs) == pairs_bytes(&warm_pairs),
        "warm rerun pairs differ"
    );
    ensure!(
        serde_json::to_vec(&cold_report).unwrap() == serde_json::to_vec(&warm_report).unwrap(),
        "warm rerun report differs"
    );
    Ok(format!(
        "counts monotone ({:?}); double failure discards; warm rerun 0 calls, byte-identical {} pair(s)",
        (
            report.totals.extracted,
            report.totals.reasoning_valid,
            report.totals.questions_generated,
            report.totals.pairs_valid
        ),
        cold_pairs.len()
    ))
}

// ---- criterion 7 -----------------------------------------------------------

fn pool(sentences: Vec<LabeledSentence>) -> NegativePool {
    NegativePool {
        setting: "s".into(),
        group: SettingGroup::Personalized,
        sentences,
    }
}

fn accuracy(real: &[LabeledSentence], negatives: Vec<LabeledSentence>, seed: u64) -> Result<f64, String> {
    let params = DiscernParams {
        seed,
        ..DiscernParams::default()
    };
    let r = discernment::run_settings("j", real, &[pool(negatives)], &NgramFeaturizer::default(), &params)
        .map_err(|e| e.to_string())?;
    Ok(r[0].accuracy)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (va, vb) = disjoint_vocabularies(&mut rng, 60);
    let real = sentences(&mut rng, &va, 300, "a", Label::Positive);
    let other = sentences(&mut rng, &vb, 300, "b", Label::Negative);
    let separable = accuracy(&real, other.clone(), 70)?;
    ensure!(separable >= 0.95, "disjoint vocabularies: accuracy {separable:.3}");

    let same = sentences(&mut rng, &va, 300, "t", Label::Negative);
    let null = accuracy(&real, same, 71)?;
    ensure!(
        (0.45..=0.55).contains(&null),
        "identical distributions: accuracy {null:.3}"
    );

    // permute labels over the separable fixture, keeping the class sizes
    let small_pos = &real[..100];
    let small_neg = &other[..100];
    let mut total = 0.0;
    let permutations = 100;
    for p in 0..permutations {
        let mut all: Vec<LabeledSentence> = small_pos.iter().chain(small_neg).cloned().collect();
        all.shuffle(&mut rng);
        let (left, right) = all.split_at(100);
        let pos: Vec<LabeledSentence> = left
            .iter()
            .cloned()
            .map(|mut s| {
                s.label = Label::Positive;
                s
            })
            .collect();
        let neg: Vec<LabeledSentence> = right
            .iter()
            .cloned()
            .map(|mut s| {
                s.label = Label::Negative;
                s
            })
            .collect();
        total += accuracy(&pos, neg, 1000 + p)?;
    }
    let permuted = total / permutations as f64;
    ensure!(
        (0.45..=0.55).contains(&permuted),
        "permutation mean accuracy {permuted:.3}"
    );
    Ok(format!(
        "disjoint {separable:.3}; identical {null:.3}; mean over {permutations} label permutations {permuted:.3}"
    ))
}

// ---- criterion 8 -----------------------------------------------------------

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut entries_total = 0usize;
    for trial in 0..1000 {
        let n = rng.gen_range(1..=2000);
        let dim = rng.gen_range(2..=24);
        let vectors: Vec<(String, Vec<f64>)> = (0..n)
            .map(|i| (format!("p{i:05}"), (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        entries_total += n;
        let index = PairIndex::from_vectors("j", vectors.clone()).map_err(|e| e.to_string())?;
        let query: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k = rng.gen_range(1..=n.min(10));
        let got = index.query_vector(&query, k).map_err(|e| e.to_string())?;

        let qn = query.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut brute: Vec<(String, f64)> = vectors
            .iter()
            .map(|(id, v)| {
                let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let dot: f64 = v.iter().zip(&query).map(|(a, b)| a * b).sum();
                (id.clone(), dot / (vn * qn))
            })
            .collect();
        brute.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        brute.truncate(k);
        ensure!(got.len() == k, "index {trial}: {} result(s) for k={k}", got.len());
        for ((gid, gs), (bid, bs)) in got.iter().zip(&brute) {
            ensure!(
                gid == bid && close(*gs, *bs, 1e-12),
                "index {trial}: {gid} {gs} vs brute force {bid} {bs}"
            );
        }

        let probe = rng.gen_range(0..n);
        let own = index.query_vector(&vectors[probe].1, 1).map_err(|e| e.to_string())?;
        ensure!(
            close(own[0].1, 1.0, 1e-12),
            "index {trial}: self-query score {}",
            own[0].1
        );
    }
    Ok(format!(
        "1000 indices ({entries_total} entries) match brute-force cosine ranking; self-query = 1.0"
    ))
}

// ---- criterion 9 -----------------------------------------------------------

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    std::fs::write(dir.path().join("splits.json"), "[]").map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_judgebench"))
        .current_dir(dir.path())
        .args(["--out", "run", "ablate", "--splits", "splits.json"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "CLI failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("run/resolved_config.toml")).map_err(|e| e.to_string())?;
    let cfg: toml::Value = toml::from_str(&text).map_err(|e| e.to_string())?;
    let get = |path: &str| -> Result<toml::Value, String> {
        path.split('.')
            .try_fold(&cfg, |v, key| v.get(key))
            .cloned()
            .ok_or_else(|| format!("{path} missing from resolved config"))
    };
    let float = |path: &str| get(path).and_then(|v| v.as_float().ok_or(format!("{path} is not a float")));
    let floats = |path: &str| -> Result<Vec<f64>, String> {
        get(path)?
            .as_array()
            .ok_or(format!("{path} is not an array"))?
            .iter()
            .map(|v| v.as_float().ok_or(format!("{path} holds a non-float")))
            .collect()
    };

    ensure!(get("corpus.min_docs")?.as_integer() == Some(100), "corpus.min_docs");
    ensure!(float("corpus.prefix_fraction")? == 0.15, "corpus.prefix_fraction");
    ensure!(
        floats("ablation.fractions")? == vec![0.25, 0.5, 0.75, 1.0],
        "ablation.fractions"
    );
    let k: Vec<i64> = get("retrieval.k_values")?
        .as_array()
        .ok_or("retrieval.k_values is not an array")?
        .iter()
        .filter_map(toml::Value::as_integer)
        .collect();
    ensure!(k == vec![3, 5], "retrieval.k_values = {k:?}");
    ensure!(float("stats.alpha")? == 0.05, "stats.alpha");
    ensure!(
        float("pipeline.extractor_temperature")? == 0.3,
        "pipeline.extractor_temperature"
    );
    ensure!(
        float("pipeline.validator_temperature")? == 0.1,
        "pipeline.validator_temperature"
    );
    Ok("min_docs 100, prefix 0.15, fractions [0.25,0.5,0.75,1.0], k [3,5], alpha 0.05, temperatures 0.3/0.1".into())
}

// ---- criterion 10 ----------------------------------------------------------

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let vocab = vocabulary(&mut rng, 400);
    let mut text = |len: usize| -> String {
        let words: Vec<&str> = (0..len).map(|_| vocab.choose(&mut rng).unwrap().as_str()).collect();
        format!("{}.", words.join(" "))
    };
    let records: Vec<GenerationRecord> = (0..10_000)
        .map(|i| GenerationRecord {
            judge_id: format!("j{}", i % 10),
            task: Task::Qa,
            item_id: format!("r{i}"),
            prompt: String::new(),
            reference: text(30),
            candidate: text(25),
            model_tag: format!("m{}", i % 3),
            model_judge: None,
        })
        .collect();
    let gw = Gateway::new(
        Arc::new(MockTransport::new(MockScript::default())),
        GatewayOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let started = Instant::now();
    let table = metrics::score_records(
        &records,
        Providers {
            embedder: None,
            tagger: Some(&gw),
        },
    );
    let elapsed = started.elapsed();
    ensure!(table.records.len() == 10_000, "{} scored rows", table.records.len());
    ensure!(
        table.records.iter().all(|r| r.error.is_none() && r.bleu.is_some()),
        "some records failed"
    );
    ensure!(
        table.aggregates.iter().all(|a| a.metrics.pos_jsd.is_some()),
        "pooled POS-JSD missing from an aggregate"
    );
    ensure!(
        elapsed < Duration::from_secs(60),
        "scoring took {:.1}s",
        elapsed.as_secs_f64()
    );
    Ok(format!(
        "10000 records, {} aggregates, scored in {:.2}s",
        table.aggregates.len(),
        elapsed.as_secs_f64()
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("metric oracles", criterion_1),
        ("centered gaps", criterion_2),
        ("wilcoxon", criterion_3),
        ("bootstrap calibration", criterion_4),
        ("gwet ac1", criterion_5),
        ("pipeline conservation and retries", criterion_6),
        ("discernment calibration", criterion_7),
        ("retrieval exactness", criterion_8),
        ("default parameters", criterion_9),
        ("scoring throughput", criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} [{secs:.1}s]: {detail}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL {name} [{secs:.1}s]: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
