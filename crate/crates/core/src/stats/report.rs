//! Per-group summary of accuracy, miscalibration and popularity lift, with
//! LowPop-versus-other significance tests.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::welch::{mean_and_variance, welch_t_test};
use crate::error::{Error, Result};
use crate::metrics::{popularity_lift, UserMetricRow};
use crate::scalar::Scalar;
use crate::stratify::Group;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Metric {
    Mae,
    Mc,
    Pl,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Mae, Metric::Mc, Metric::Pl];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Mae => "MAE",
            Metric::Mc => "MC",
            Metric::Pl => "PL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary<T> {
    pub group: Group,
    pub users: usize,
    pub mae: Option<T>,
    pub mc: Option<T>,
    pub gap_p: T,
    pub gap_q: Option<T>,
    pub pl: Option<T>,
}

impl<T: Scalar> GroupSummary<T> {
    pub fn value(&self, metric: Metric) -> Option<T> {
        match metric {
            Metric::Mae => self.mae,
            Metric::Mc => self.mc,
            Metric::Pl => self.pl,
        }
    }
}

/// LowPop against one other group on one metric. `p` is `None` when the test
/// is not applicable (PL, or fewer than two values on a side).
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<T> {
    pub metric: Metric,
    pub other: Group,
    pub t: Option<T>,
    pub p: Option<T>,
}

impl<T: Scalar> Comparison<T> {
    pub fn significant(&self) -> bool {
        self.p.is_some_and(|p| p < T::of(SIGNIFICANCE_LEVEL))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport<T> {
    pub algorithm: String,
    /// LowPop, MedPop, HighPop.
    pub groups: [GroupSummary<T>; 3],
    pub comparisons: Vec<Comparison<T>>,
}

impl<T: Scalar> GroupReport<T> {
    pub fn summary(&self, group: Group) -> &GroupSummary<T> {
        &self.groups[group as usize]
    }

    pub fn comparison(&self, metric: Metric, other: Group) -> Option<&Comparison<T>> {
        self.comparisons
            .iter()
            .find(|c| c.metric == metric && c.other == other)
    }

    /// Group with the highest (worst) value; the earliest group wins ties.
    pub fn worst(&self, metric: Metric) -> Option<Group> {
        let mut worst: Option<(Group, T)> = None;
        for s in &self.groups {
            if let Some(v) = s.value(metric) {
                if worst.is_none_or(|(_, w)| v > w) {
                    worst = Some((s.group, v));
                }
            }
        }
        worst.map(|(g, _)| g)
    }

    /// LowPop differs significantly from both other groups.
    pub fn low_pop_significant(&self, metric: Metric) -> bool {
        [Group::MedPop, Group::HighPop].iter().all(|&g| {
            self.comparison(metric, g)
                .is_some_and(Comparison::significant)
        })
    }
}

fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().copied().sum::<T>() / T::of_usize(values.len()))
    }
}

/// Welch test that maps the both-constant case onto a definite answer:
/// equal constants give `p = 1`, distinct constants `p = 0`.
fn compare<T: Scalar>(low: &[T], other: &[T]) -> (Option<T>, Option<T>) {
    if low.len() < 2 || other.len() < 2 {
        return (None, None);
    }
    match welch_t_test(low, other) {
        Ok(r) => (Some(r.t), Some(r.p)),
        Err(Error::ZeroVariance) => {
            let (ml, _) = mean_and_variance(low);
            let (mo, _) = mean_and_variance(other);
            if ml == mo {
                (Some(T::zero()), Some(T::one()))
            } else {
                let t = if ml > mo {
                    T::infinity()
                } else {
                    T::neg_infinity()
                };
                (Some(t), Some(T::zero()))
            }
        }
        Err(_) => (None, None),
    }
}

/// Aggregate per-user rows into a group report.
///
/// MAE and MC are unweighted means of the per-user values; PL is computed
/// from the group GAPs (means of per-user `gap_p` and `gap_q`).
pub fn build_group_report<T: Scalar>(
    algorithm: &str,
    rows: &[UserMetricRow<T>],
) -> Result<GroupReport<T>> {
    let mut per_group: [Vec<&UserMetricRow<T>>; 3] = Default::default();
    for row in rows {
        per_group[row.group as usize].push(row);
    }
    for g in Group::ALL {
        if per_group[g as usize].is_empty() {
            return Err(Error::MissingGroup(g.label()));
        }
    }

    let values = |g: Group, metric: Metric| -> Vec<T> {
        per_group[g as usize]
            .iter()
            .filter_map(|r| match metric {
                Metric::Mae => r.mae,
                Metric::Mc => r.mc,
                Metric::Pl => None,
            })
            .collect()
    };

    let groups = Group::ALL.map(|g| {
        let members = &per_group[g as usize];
        let gap_p =
            mean(&members.iter().map(|r| r.gap_p).collect::<Vec<_>>()).expect("group is non-empty");
        let gap_q = mean(&members.iter().filter_map(|r| r.gap_q).collect::<Vec<_>>());
        GroupSummary {
            group: g,
            users: members.len(),
            mae: mean(&values(g, Metric::Mae)),
            mc: mean(&values(g, Metric::Mc)),
            gap_p,
            gap_q,
            pl: gap_q.and_then(|q| popularity_lift(gap_p, q).ok()),
        }
    });

    let mut comparisons = Vec::new();
    for metric in Metric::ALL {
        for other in [Group::MedPop, Group::HighPop] {
            let (t, p) = match metric {
                Metric::Pl => (None, None),
                _ => compare(&values(Group::LowPop, metric), &values(other, metric)),
            };
            comparisons.push(Comparison {
                metric,
                other,
                t,
                p,
            });
        }
    }

    Ok(GroupReport {
        algorithm: algorithm.to_owned(),
        groups,
        comparisons,
    })
}

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| x.as_f64().to_string()).unwrap_or_default()
}

/// CSV with one row per group:
/// `algorithm,group,users,mae,mc,pl,gap_p,gap_q,mae_p,mc_p,pl_p,worst`.
///
/// The `*_p` columns hold the p-value of LowPop against that row's group
/// (empty on the LowPop row, `NA` for PL); `worst` lists the metrics on which
/// the group scores highest.
pub fn write_report_csv<T: Scalar, W: Write>(
    out: W,
    reports: &[GroupReport<T>],
) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record([
        "algorithm",
        "group",
        "users",
        "mae",
        "mc",
        "pl",
        "gap_p",
        "gap_q",
        "mae_p",
        "mc_p",
        "pl_p",
        "worst",
    ])?;
    for report in reports {
        for s in &report.groups {
            let p_of = |metric: Metric| -> String {
                if s.group == Group::LowPop {
                    return String::new();
                }
                if metric == Metric::Pl {
                    return "NA".to_owned();
                }
                report
                    .comparison(metric, s.group)
                    .and_then(|c| c.p)
                    .map(|p| p.as_f64().to_string())
                    .unwrap_or_else(|| "NA".to_owned())
            };
            let worst: Vec<&str> = Metric::ALL
                .iter()
                .filter(|&&m| report.worst(m) == Some(s.group))
                .map(|m| m.label())
                .collect();
            writer.write_record([
                report.algorithm.as_str(),
                s.group.label(),
                &s.users.to_string(),
                &fmt_opt(s.mae),
                &fmt_opt(s.mc),
                &fmt_opt(s.pl),
                &s.gap_p.as_f64().to_string(),
                &fmt_opt(s.gap_q),
                &p_of(Metric::Mae),
                &p_of(Metric::Mc),
                &p_of(Metric::Pl),
                &worst.join(";"),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Aligned markdown table, one block of three group rows per algorithm.
/// The worst value per metric is bold; `*` marks a LowPop value that differs
/// from both other groups at p < 0.05.
pub fn render_markdown<T: Scalar>(reports: &[GroupReport<T>]) -> String {
    let header = ["Algorithm", "Group", "MAE", "MC", "PL"];
    let mut rows: Vec<[String; 5]> = Vec::new();
    for report in reports {
        for s in &report.groups {
            let cell = |metric: Metric| -> String {
                let Some(v) = s.value(metric) else {
                    return "n/a".to_owned();
                };
                let mut text = format!("{:.4}", v.as_f64());
                if s.group == Group::LowPop && report.low_pop_significant(metric) {
                    text.push('*');
                }
                if report.worst(metric) == Some(s.group) {
                    text = format!("**{text}**");
                }
                text
            };
            rows.push([
                report.algorithm.clone(),
                s.group.label().to_owned(),
                cell(Metric::Mae),
                cell(Metric::Mc),
                cell(Metric::Pl),
            ]);
        }
    }
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        out.push('|');
        for (c, w) in cells.iter().zip(widths) {
            let _ = write!(out, " {c:<w$} |");
        }
        out.push('\n');
    };
    line(&mut out, &header.map(str::to_owned));
    out.push('|');
    for w in widths {
        let _ = write!(out, "{}|", "-".repeat(w + 2));
    }
    out.push('\n');
    for row in &rows {
        line(&mut out, row);
    }
    out
}
