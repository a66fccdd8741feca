//! Plain-text tables for reports. Numbers are shown at one decimal; the JSON
//! reports keep full precision.

use std::fmt::Write;

use cre_core::corpus::DatasetStats;
use cre_core::eval::{ConfusionCounts, EvalReport, Metrics};

/// One decimal, or `-` when undefined.
pub fn fmt1(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.1}"),
        None => "-".into(),
    }
}

fn pct(v: Option<f64>) -> Option<f64> {
    v.map(|x| 100.0 * x)
}

fn row(out: &mut String, name: &str, c: &ConfusionCounts, m: &Metrics, width: usize) {
    let _ = writeln!(
        out,
        "{name:<width$} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
        c.total(),
        c.positives(),
        c.negatives(),
        fmt1(m.acc),
        fmt1(m.acc_pos),
        fmt1(m.acc_neg),
        fmt1(m.precision),
        fmt1(m.recall),
        fmt1(m.f1),
    );
}

pub fn eval_table(report: &EvalReport) -> String {
    let width = report
        .per_relation
        .keys()
        .map(String::len)
        .chain([8])
        .max()
        .unwrap_or(8);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}",
        "relation", "n", "pos", "neg", "Acc", "Acc+", "Acc-", "P", "R", "F1"
    );
    for (name, r) in &report.per_relation {
        row(&mut out, name, &r.counts, &r.metrics, width);
    }
    row(&mut out, "all", &report.counts, &report.metrics, width);
    out
}

pub fn stats_table(s: &DatasetStats) -> String {
    let mut out = String::new();
    let width = s
        .per_relation
        .keys()
        .map(String::len)
        .chain([40])
        .max()
        .unwrap_or(40);
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k:<width$} {v:>10}");
    };
    line("groups", s.groups.to_string());
    line("sentences (group x sentence)", s.sentences.to_string());
    line("distinct sentences", s.distinct_sentences.to_string());
    line("instances", s.instances.to_string());
    line("positive", s.positive.to_string());
    line("negative", s.negative.to_string());
    line(
        "mean pairs per sentence",
        s.mean_pairs_per_sentence
            .map_or("-".into(), |v| format!("{v:.2}")),
    );
    line(
        "sentences with conflicting labels (%)",
        fmt1(pct(s.conflicting_label_fraction)),
    );
    line(
        "sentences with a shared argument (%)",
        fmt1(pct(s.shared_argument_fraction)),
    );
    line(
        "sentences with more than one pair (%)",
        fmt1(pct(s.multi_pair_sentence_fraction)),
    );
    line(
        "annotated pairs in multi-pair sentences (%)",
        fmt1(pct(s.annotated_pair_fraction)),
    );
    line(
        "mean sentence length (tokens)",
        fmt1(s.mean_sentence_tokens),
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<width$} {:>10} {:>10}",
        "relation", "positive", "negative"
    );
    for (rel, c) in &s.per_relation {
        let _ = writeln!(out, "{rel:<width$} {:>10} {:>10}", c.positive, c.negative);
    }
    out
}
