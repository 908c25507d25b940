//! Cross-judge aggregation over scored records and the markdown renderers
//! for the three summary tables: pivot comparison, discernment accuracy and
//! cross-judge specificity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::discernment::{SettingGroup, SettingResult};
use crate::metrics::{RecordScore, Task};
use crate::stats::{self, GapResult, JudgeItemScores, ScoreMatrix, StatsError};

/// Column order and orientation used by every table.
pub const METRICS: [(&str, &str, bool); 6] = [
    ("bleu", "BLEU ↑", true),
    ("embed_f", "BS-F ↑", true),
    ("pos_jsd", "POS ↓", false),
    ("rouge1", "R-1 ↑", true),
    ("rouge2", "R-2 ↑", true),
    ("rougeL", "R-L ↑", true),
];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no scored records for task {0:?}")]
    NoRecords(Task),
    #[error("method {method}: no score for model of judge {model_judge} on test set of judge {judge}")]
    MissingCell {
        method: String,
        model_judge: String,
        judge: String,
    },
    #[error("method {method}: fewer than two judges with matched models")]
    TooFewJudges { method: String },
    #[error("pivot method {0} not found")]
    MissingPivot(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Method name of a model tag: the part before `@` when the tag names the
/// judge it was personalized to.
pub fn method_of(model_tag: &str) -> &str {
    model_tag.split_once('@').map_or(model_tag, |(m, _)| m)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Scores of one personalized method on one metric, indexed by
/// (model judge, test-set judge, item id).
struct MethodScores<'a> {
    cells: BTreeMap<(&'a str, &'a str), BTreeMap<&'a str, f64>>,
}

fn collect<'a>(records: &'a [RecordScore], task: Task, method: &str, metric: &str) -> MethodScores<'a> {
    let mut cells: BTreeMap<(&str, &str), BTreeMap<&str, f64>> = BTreeMap::new();
    for r in records {
        if r.task != task || method_of(&r.model_tag) != method {
            continue;
        }
        let (Some(mj), Some(v)) = (r.model_judge.as_deref(), r.metric(metric)) else {
            continue;
        };
        cells
            .entry((mj, r.judge_id.as_str()))
            .or_default()
            .insert(r.record_id.as_str(), v);
    }
    MethodScores { cells }
}

/// Builds the model-by-test-set matrix of mean scores and, per judge, the
/// item-aligned scores of the matched model against the mean of the others.
/// Items not scored by every model on a test set are left out of the
/// per-item comparison.
pub fn cross_judge_inputs(
    records: &[RecordScore],
    task: Task,
    method: &str,
    metric: &str,
    higher_is_better: bool,
) -> Result<Option<(ScoreMatrix, Vec<JudgeItemScores>)>, ReportError> {
    let scores = collect(records, task, method, metric);
    if scores.cells.is_empty() {
        return Ok(None);
    }
    let model_judges: BTreeSet<&str> = scores.cells.keys().map(|(m, _)| *m).collect();
    let test_judges: BTreeSet<&str> = scores.cells.keys().map(|(_, j)| *j).collect();
    let judges: Vec<&str> = model_judges.intersection(&test_judges).copied().collect();
    if judges.len() < 2 {
        return Err(ReportError::TooFewJudges {
            method: method.to_string(),
        });
    }
    fn lookup<'s, 'a>(
        scores: &'s MethodScores<'a>,
        method: &str,
        k: &'a str,
        j: &'a str,
    ) -> Result<&'s BTreeMap<&'a str, f64>, ReportError> {
        scores.cells.get(&(k, j)).ok_or_else(|| ReportError::MissingCell {
            method: method.to_string(),
            model_judge: k.to_string(),
            judge: j.to_string(),
        })
    }
    let mut values = vec![vec![0.0; judges.len()]; judges.len()];
    for (k, mk) in judges.iter().enumerate() {
        for (j, tj) in judges.iter().enumerate() {
            let c = lookup(&scores, method, mk, tj)?;
            values[k][j] = mean(&c.values().copied().collect::<Vec<_>>());
        }
    }
    let mut items = Vec::with_capacity(judges.len());
    for (j, tj) in judges.iter().enumerate() {
        let matched = lookup(&scores, method, tj, tj)?;
        let others: Vec<_> = judges
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .map(|(_, mk)| lookup(&scores, method, mk, tj))
            .collect::<Result<_, _>>()?;
        let mut it = JudgeItemScores {
            matched: Vec::new(),
            other: Vec::new(),
        };
        for (item, v) in matched {
            let rest: Option<Vec<f64>> = others.iter().map(|o| o.get(item).copied()).collect();
            if let Some(rest) = rest {
                it.matched.push(*v);
                it.other.push(mean(&rest));
            }
        }
        items.push(it);
    }
    Ok(Some((
        ScoreMatrix {
            judges: judges.iter().map(|s| s.to_string()).collect(),
            values,
            metric_name: metric.to_string(),
            higher_is_better,
        },
        items,
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossJudgeRow {
    pub task: Task,
    pub method: String,
    pub gaps: Vec<GapResult>,
}

/// Runs the specificity analysis for every personalized method found in the
/// records (tags carrying a model judge), for each task and metric present.
pub fn cross_judge(
    records: &[RecordScore],
    resamples: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<CrossJudgeRow>, ReportError> {
    let mut methods: BTreeSet<(Task, &str)> = BTreeSet::new();
    for r in records {
        if r.model_judge.is_some() {
            methods.insert((r.task, method_of(&r.model_tag)));
        }
    }
    let mut rows = Vec::new();
    for (task, method) in methods {
        let mut gaps = Vec::new();
        for (metric, _, hib) in METRICS {
            if let Some((m, items)) = cross_judge_inputs(records, task, method, metric, hib)? {
                let stream = format!("{task:?}/{method}/{metric}");
                gaps.push(stats::specificity_report(
                    &m,
                    &items,
                    resamples,
                    crate::text::derive_seed(seed, &stream),
                    alpha,
                )?);
            }
        }
        rows.push(CrossJudgeRow {
            task,
            method: method.to_string(),
            gaps,
        });
    }
    Ok(rows)
}

fn task_heading(task: Task) -> &'static str {
    match task {
        Task::NextToken => "Next Token Prediction (CLM) Setting",
        Task::Qa => "Instruction Setting",
    }
}

fn header(out: &mut String, first: &str, columns: &[&str]) {
    let _ = writeln!(out, "| {first} | {} |", columns.join(" | "));
    let _ = writeln!(out, "|---|{}", ":---:|".repeat(columns.len()));
}

/// One row per method; cells read `mean gap (fraction significant)`.
pub fn render_cross_judge(rows: &[CrossJudgeRow]) -> String {
    let mut out = String::new();
    let labels: Vec<&str> = METRICS.iter().map(|m| m.1).collect();
    header(&mut out, "Method", &labels);
    let mut current = None;
    for row in rows {
        if current != Some(row.task) {
            let _ = writeln!(out, "| *{}* |{}", task_heading(row.task), " |".repeat(labels.len()));
            current = Some(row.task);
        }
        let cells: Vec<String> = METRICS
            .iter()
            .map(|(metric, _, _)| {
                row.gaps
                    .iter()
                    .find(|g| g.metric == *metric)
                    .map_or("n/a".to_string(), |g| {
                        format!("{:.3} ({:.2})", g.mean_gap, g.fraction_significant)
                    })
            })
            .collect();
        let _ = writeln!(out, "| {} | {} |", row.method, cells.join(" | "));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotCell {
    pub metric: String,
    pub mean_diff: f64,
    pub p_value: f64,
    pub significant: bool,
    pub n_judges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotRow {
    pub method: String,
    pub group: Option<String>,
    pub cells: Vec<PivotCell>,
}

/// Per-judge score of a method: mean over that judge's test records, keeping
/// only the judge's own model for personalized methods.
fn per_judge_means(records: &[RecordScore], task: Task, method: &str, metric: &str) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.task != task || method_of(&r.model_tag) != method {
            continue;
        }
        if r.model_judge.as_deref().is_some_and(|mj| mj != r.judge_id) {
            continue;
        }
        if let Some(v) = r.metric(metric) {
            acc.entry(&r.judge_id).or_default().push(v);
        }
    }
    acc.into_iter().map(|(j, v)| (j.to_string(), mean(&v))).collect()
}

/// Pivot minus competitor, averaged across judges, with a paired Wilcoxon
/// test over the per-judge differences. Raw differences are reported, so a
/// negative POS entry means the pivot is closer in style.
pub fn pivot_comparison(
    records: &[RecordScore],
    task: Task,
    pivot: &str,
    groups: &BTreeMap<String, String>,
    alpha: f64,
) -> Result<Vec<PivotRow>, ReportError> {
    let methods: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.task == task)
        .map(|r| method_of(&r.model_tag))
        .collect();
    if methods.is_empty() {
        return Err(ReportError::NoRecords(task));
    }
    if !methods.contains(pivot) {
        return Err(ReportError::MissingPivot(pivot.to_string()));
    }
    let mut rows = Vec::new();
    for method in methods.iter().filter(|m| **m != pivot) {
        let mut cells = Vec::new();
        for (metric, _, _) in METRICS {
            let p = per_judge_means(records, task, pivot, metric);
            let c = per_judge_means(records, task, method, metric);
            let diffs: Vec<f64> = p.iter().filter_map(|(j, pv)| c.get(j).map(|cv| pv - cv)).collect();
            if diffs.is_empty() {
                continue;
            }
            let w = stats::wilcoxon_signed_rank(&diffs)?;
            cells.push(PivotCell {
                metric: metric.to_string(),
                mean_diff: mean(&diffs),
                p_value: w.p_value,
                significant: w.p_value < alpha,
                n_judges: diffs.len(),
            });
        }
        rows.push(PivotRow {
            method: method.to_string(),
            group: groups.get(*method).cloned(),
            cells,
        });
    }
    rows.sort_by(|a, b| a.group.cmp(&b.group).then_with(|| a.method.cmp(&b.method)));
    Ok(rows)
}

/// Differences against the pivot; `*` marks entries that are not significant.
pub fn render_pivot(rows: &[PivotRow]) -> String {
    let mut out = String::new();
    let labels: Vec<&str> = METRICS.iter().map(|m| m.1).collect();
    header(&mut out, "Model", &labels);
    let mut current: Option<&Option<String>> = None;
    for row in rows {
        if current != Some(&row.group) {
            if let Some(g) = &row.group {
                let _ = writeln!(out, "| **{g}** |{}", " |".repeat(labels.len()));
            }
            current = Some(&row.group);
        }
        let cells: Vec<String> = METRICS
            .iter()
            .map(|(metric, _, _)| {
                row.cells
                    .iter()
                    .find(|c| c.metric == *metric)
                    .map_or("n/a".into(), |c| {
                        let star = if c.significant { "" } else { "*" };
                        format!("{:+.3}{star}", c.mean_diff)
                    })
            })
            .collect();
        let _ = writeln!(out, "| {} | {} |", row.method, cells.join(" | "));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscernRow {
    pub setting: String,
    pub group: SettingGroup,
    pub mean_accuracy: f64,
    pub n_judges: usize,
    pub p_value: f64,
    pub significant: bool,
}

/// Mean accuracy per setting across judges, tested against chance with a
/// Wilcoxon test over per-judge `accuracy - 0.5`.
pub fn summarize_discernment(results: &[SettingResult], alpha: f64) -> Result<Vec<DiscernRow>, ReportError> {
    let mut by_setting: BTreeMap<(SettingGroup, &str), Vec<f64>> = BTreeMap::new();
    let mut order: Vec<(SettingGroup, &str)> = Vec::new();
    for r in results {
        let key = (r.group, r.setting.as_str());
        if !by_setting.contains_key(&key) {
            order.push(key);
        }
        by_setting.entry(key).or_default().push(r.accuracy);
    }
    order.sort_by_key(|(g, _)| *g);
    let mut rows = Vec::with_capacity(order.len());
    for key in order {
        let accs = &by_setting[&key];
        let diffs: Vec<f64> = accs.iter().map(|a| a - 0.5).collect();
        let w = stats::wilcoxon_signed_rank(&diffs)?;
        rows.push(DiscernRow {
            setting: key.1.to_string(),
            group: key.0,
            mean_accuracy: mean(accs),
            n_judges: accs.len(),
            p_value: w.p_value,
            significant: w.p_value < alpha,
        });
    }
    Ok(rows)
}

/// Accuracy in percent; `*` marks a significant difference from chance.
pub fn render_discernment(rows: &[DiscernRow]) -> String {
    let mut out = String::new();
    header(&mut out, "Setting / Method", &["Acc. (%)"]);
    let _ = writeln!(out, "| Random classifier | 50.0 |");
    let mut current = None;
    for row in rows {
        let indent = if row.group == SettingGroup::Reference {
            ""
        } else {
            if current != Some(row.group) {
                let _ = writeln!(out, "| **{}** | |", row.group.heading());
            }
            "&nbsp;&nbsp;"
        };
        current = Some(row.group);
        let star = if row.significant { "*" } else { "" };
        let _ = writeln!(
            out,
            "| {indent}{} | {:.1}{star} |",
            row.setting,
            row.mean_accuracy * 100.0
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(judge: &str, model: &str, mj: Option<&str>, item: &str, bleu: f64) -> RecordScore {
        RecordScore {
            record_id: item.into(),
            judge_id: judge.into(),
            task: Task::Qa,
            model_tag: model.into(),
            model_judge: mj.map(String::from),
            bleu: Some(bleu),
            rouge1: None,
            rouge2: None,
            rouge_l: None,
            embed_p: None,
            embed_r: None,
            embed_f: None,
            embed_degraded: false,
            pos_jsd: None,
            error: None,
        }
    }

    fn planted_records() -> Vec<RecordScore> {
        let m = [[0.9, 0.2, 0.1], [0.3, 0.8, 0.2], [0.1, 0.3, 0.7]];
        let judges = ["a", "b", "c"];
        let mut out = Vec::new();
        for (k, mk) in judges.iter().enumerate() {
            for (j, tj) in judges.iter().enumerate() {
                for item in ["i1", "i2"] {
                    out.push(rec(tj, &format!("pers@{mk}"), Some(mk), item, m[k][j]));
                }
            }
        }
        out
    }

    #[test]
    fn method_names() {
        assert_eq!(method_of("pers-it@judge_3"), "pers-it");
        assert_eq!(method_of("vanilla"), "vanilla");
    }

    #[test]
    fn matrix_from_records_gives_planted_gaps() {
        let recs = planted_records();
        let (m, items) = cross_judge_inputs(&recs, Task::Qa, "pers", "bleu", true)
            .unwrap()
            .unwrap();
        let d = stats::centered_gaps(&m).unwrap();
        for (got, want) in d.iter().zip([0.7, 0.55, 0.55]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(items[0].matched, vec![0.9, 0.9]);
        assert!((items[0].other[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn missing_cell_is_reported() {
        let mut recs = planted_records();
        recs.retain(|r| !(r.judge_id == "b" && r.model_judge.as_deref() == Some("c")));
        assert!(matches!(
            cross_judge_inputs(&recs, Task::Qa, "pers", "bleu", true),
            Err(ReportError::MissingCell { .. })
        ));
    }

    #[test]
    fn cross_judge_table_layout() {
        let rows = cross_judge(&planted_records(), 200, 1, 0.05).unwrap();
        assert_eq!(rows.len(), 1);
        let md = render_cross_judge(&rows);
        assert!(md.contains("| *Instruction Setting* |"));
        assert!(md.contains("| pers | 0.600 ("), "{md}");
        assert!(md.contains("n/a"));
    }

    #[test]
    fn pivot_marks_non_significant() {
        let mut recs = Vec::new();
        for (i, j) in ["a", "b", "c", "d", "e", "f", "g"].iter().enumerate() {
            recs.push(rec(j, &format!("cola@{j}"), Some(j), "x", 10.0 + i as f64));
            recs.push(rec(j, "vanilla", None, "x", 5.0));
            recs.push(rec(
                j,
                "rag",
                None,
                "x",
                10.0 + i as f64 + if i % 2 == 0 { 0.1 } else { -0.1 },
            ));
        }
        let mut groups = BTreeMap::new();
        groups.insert("vanilla".to_string(), "Baselines".to_string());
        let rows = pivot_comparison(&recs, Task::Qa, "cola", &groups, 0.05).unwrap();
        let md = render_pivot(&rows);
        assert!(md.contains("| vanilla | +8.000 |"), "{md}");
        assert!(md.contains("| rag | -0.014* |"), "{md}");
        assert!(md.contains("| **Baselines** |"));
        assert!(matches!(
            pivot_comparison(&recs, Task::Qa, "nope", &groups, 0.05),
            Err(ReportError::MissingPivot(_))
        ));
    }

    #[test]
    fn discernment_table_layout() {
        let mk = |setting: &str, group, acc| SettingResult {
            judge_id: "j".into(),
            setting: setting.into(),
            group,
            accuracy: acc,
            n_train: 10,
            n_test: 4,
        };
        let mut results = Vec::new();
        for i in 0..8 {
            results.push(mk("Vanilla", SettingGroup::Baseline, 0.8 + 0.01 * i as f64));
            results.push(mk(
                "CoLA",
                SettingGroup::Personalized,
                0.5 + if i % 2 == 0 { 0.01 } else { -0.01 },
            ));
            results.push(mk("Ground truth", SettingGroup::Reference, 0.9));
        }
        let rows = summarize_discernment(&results, 0.05).unwrap();
        let md = render_discernment(&rows);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[2], "| Random classifier | 50.0 |");
        assert_eq!(lines[3], "| Ground truth | 90.0* |");
        assert!(md.contains("| &nbsp;&nbsp;Vanilla | 83.5* |"), "{md}");
        assert!(md.contains("| &nbsp;&nbsp;CoLA | 50.0 |"), "{md}");
        assert!(md.contains("| **Personalized models** | |"));
    }
}
