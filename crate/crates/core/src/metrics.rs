//! Accuracy, miscalibration and popularity-lift metrics.

use std::fmt::Display;
use std::io::Write;

use num_traits::{FromPrimitive, Num, Signed};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{GenreDistribution, InteractionDataset, ItemId, UserId};
use crate::recommenders::{RecommendationList, Recommender};
use crate::scalar::Scalar;
use crate::stratify::{Group, PopularityProfile, UserGroups};

pub const DEFAULT_ALPHA: f64 = 0.01;

/// Mean absolute error over `(predicted, actual)` pairs.
///
/// Only needs signed field arithmetic, so exact types such as
/// `num_rational::Ratio` work as well as floats.
pub fn mae<T: Signed + Copy + FromPrimitive>(pairs: &[(T, T)]) -> Result<T> {
    if pairs.is_empty() {
        return Err(Error::NoTestRatings);
    }
    let total = pairs
        .iter()
        .fold(T::zero(), |acc, &(p, a)| acc + (p - a).abs());
    let count = T::from_usize(pairs.len())
        .ok_or_else(|| Error::InvalidArgument("too many pairs".into()))?;
    Ok(total / count)
}

/// Unsmoothed `KL(p ‖ q)` with the natural logarithm. Infinite when `q`
/// misses a genre that `p` covers.
pub fn kl_divergence<T: Scalar>(p: &GenreDistribution<T>, q: &GenreDistribution<T>) -> T {
    p.iter()
        .filter(|&(_, pc)| pc > T::zero())
        .map(|(c, pc)| pc * (pc / q.mass(c)).ln())
        .sum::<T>()
        .max(T::zero())
}

/// Miscalibration `KL(p ‖ q̃)` with `q̃ = (1 − α)·q + α·p`.
///
/// The mixture keeps `q̃(c) > 0` wherever `p(c) > 0`, so the value is finite
/// even when the list misses a profile genre; it is at most `ln(1/α)`.
pub fn kl_miscalibration<T: Scalar>(
    p: &GenreDistribution<T>,
    q: &GenreDistribution<T>,
    alpha: T,
) -> Result<T> {
    if p.is_empty() {
        return Err(Error::NoGenreProfile);
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let kl: T = p
        .iter()
        .filter(|&(_, pc)| pc > T::zero())
        .map(|(c, pc)| {
            let smoothed = (T::one() - alpha) * q.mass(c) + alpha * pc;
            pc * (pc / smoothed).ln()
        })
        .sum();
    // rounding can leave a few ulps below zero for p == q
    Ok(kl.max(T::zero()))
}

/// Group average popularity: per-user mean item popularity, then the
/// unweighted mean over users.
pub fn gap<T: Scalar, L: AsRef<[ItemId]>>(
    lists: &[(UserId, L)],
    profile: &PopularityProfile<T>,
) -> Result<T> {
    if lists.is_empty() {
        return Err(Error::InvalidArgument("no user lists".into()));
    }
    let mut total = T::zero();
    for (user, items) in lists {
        total += profile
            .mean_popularity(items.as_ref())
            .ok_or(Error::EmptyUserList(*user))?;
    }
    Ok(total / T::of_usize(lists.len()))
}

/// `(GAP_q − GAP_p) / GAP_p`. Generic over any ordered field, including
/// exact rationals.
pub fn popularity_lift<T: Num + Copy + PartialOrd + Display>(gap_p: T, gap_q: T) -> Result<T> {
    if gap_p == T::zero() {
        return Err(Error::ZeroProfilePopularity);
    }
    if !(gap_p > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "gap_p must be positive, got {gap_p}"
        )));
    }
    Ok((gap_q - gap_p) / gap_p)
}

/// Per-user evaluation outcome. Absent values mark users without test
/// ratings, without genre mass, or with an empty recommendation list.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMetricRow<T> {
    pub user: UserId,
    pub group: Group,
    pub mae: Option<T>,
    pub mc: Option<T>,
    pub gap_p: T,
    pub gap_q: Option<T>,
}

impl<T: Scalar> UserMetricRow<T> {
    /// Per-user analogue of popularity lift.
    pub fn lift(&self) -> Option<T> {
        self.gap_q.and_then(|q| popularity_lift(self.gap_p, q).ok())
    }
}

/// Everything needed to score one fitted model.
pub struct EvaluationInput<'a, T> {
    pub train: &'a InteractionDataset<T>,
    pub test: &'a InteractionDataset<T>,
    pub profile: &'a PopularityProfile<T>,
    pub groups: &'a UserGroups,
    /// One list per user, indexed by user id.
    pub lists: &'a [RecommendationList<T>],
    pub alpha: T,
}

/// Metric rows for every grouped user, in user-id order.
pub fn evaluate_users<T: Scalar, M: Recommender<T> + ?Sized>(
    model: &M,
    input: &EvaluationInput<'_, T>,
) -> Result<Vec<UserMetricRow<T>>> {
    let users = input.train.num_users();
    let mut train_items: Vec<Vec<ItemId>> = vec![Vec::new(); users];
    for r in input.train.ratings() {
        train_items[r.user.index()].push(r.item);
    }
    let mut test_ratings: Vec<Vec<(ItemId, T)>> = vec![Vec::new(); users];
    for r in input.test.ratings() {
        test_ratings[r.user.index()].push((r.item, r.value));
    }

    let rows: Vec<Option<UserMetricRow<T>>> = (0..users)
        .into_par_iter()
        .map(|u| -> Result<Option<UserMetricRow<T>>> {
            let user = UserId::from_index(u);
            let Some(group) = input.groups.group_of(user) else {
                return Ok(None);
            };
            let gap_p = input
                .profile
                .inclination(user)
                .expect("grouped user has a profile");

            let pairs = test_ratings[u]
                .iter()
                .map(|&(i, actual)| model.predict(user, i).map(|p| (p, actual)))
                .collect::<Result<Vec<_>>>()?;
            let user_mae = if pairs.is_empty() {
                None
            } else {
                Some(mae(&pairs)?)
            };

            let list_items = input.lists[u].items();
            let gap_q = input.profile.mean_popularity(&list_items);
            let mc = if list_items.is_empty() {
                None
            } else {
                let p = input.train.genre_distribution(&train_items[u])?;
                let q = input.train.genre_distribution(&list_items)?;
                if p.is_empty() {
                    None
                } else {
                    Some(kl_miscalibration(&p, &q, input.alpha)?)
                }
            };
            Ok(Some(UserMetricRow {
                user,
                group,
                mae: user_mae,
                mc,
                gap_p,
                gap_q,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn opt(value: Option<impl Scalar>) -> String {
    value.map(|v| v.as_f64().to_string()).unwrap_or_default()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// CSV `user,group,mae,mc,gap_p,gap_q`; absent values are empty fields.
pub fn write_user_metrics_csv<T: Scalar, W: Write>(
    out: W,
    dataset: &InteractionDataset<T>,
    rows: &[UserMetricRow<T>],
) -> csv::Result<()> {
    let mut writer = csv_writer(out);
    writer.write_record(["user", "group", "mae", "mc", "gap_p", "gap_q"])?;
    for row in rows {
        writer.write_record([
            dataset.user_key(row.user),
            row.group.label(),
            &opt(row.mae),
            &opt(row.mc),
            &row.gap_p.as_f64().to_string(),
            &opt(row.gap_q),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// CSV `user,group,lift` with the per-user `(gap_q − gap_p) / gap_p`.
pub fn write_user_lift_csv<T: Scalar, W: Write>(
    out: W,
    dataset: &InteractionDataset<T>,
    rows: &[UserMetricRow<T>],
) -> csv::Result<()> {
    let mut writer = csv_writer(out);
    writer.write_record(["user", "group", "lift"])?;
    for row in rows {
        writer.write_record([
            dataset.user_key(row.user),
            row.group.label(),
            &opt(row.lift()),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
