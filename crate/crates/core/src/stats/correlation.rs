use std::cmp::Ordering;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{InteractionDataset, ItemId};
use crate::recommenders::RecommendationList;
use crate::scalar::Scalar;

/// Pearson correlation; errors if either variable is constant.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "correlation needs two equally long series of length >= 2".into(),
        ));
    }
    let n = T::of_usize(xs.len());
    let mean_x = xs.iter().copied().sum::<T>() / n;
    let mean_y = ys.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() {
        return Err(Error::UndefinedCorrelation("first variable"));
    }
    if syy == T::zero() {
        return Err(Error::UndefinedCorrelation("second variable"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt()))
        .max(-T::one())
        .min(T::one()))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks<T: Scalar>(xs: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![T::zero(); xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = T::of_usize(start + 1 + end) / T::of(2.0);
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T> {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Per-item popularity against how often the item was recommended.
#[derive(Debug, Clone, PartialEq)]
pub struct PopFreqSeries<T> {
    /// Interaction count per item.
    pub popularity: Vec<usize>,
    /// Appearances across all users' lists per item.
    pub frequency: Vec<usize>,
    /// `None` when either series is constant.
    pub pearson: Option<T>,
    pub spearman: Option<T>,
}

pub fn pop_freq_correlation<T: Scalar>(
    lists: &[RecommendationList<T>],
    train: &InteractionDataset<T>,
) -> Result<PopFreqSeries<T>> {
    let items = train.num_items();
    let mut popularity = vec![0usize; items];
    for r in train.ratings() {
        popularity[r.item.index()] += 1;
    }
    let mut frequency = vec![0usize; items];
    for list in lists {
        for &(item, _) in &list.entries {
            frequency[item.index()] += 1;
        }
    }
    if frequency.iter().all(|&f| f == 0) {
        return Err(Error::NoRecommendations);
    }
    let pop: Vec<T> = popularity.iter().map(|&c| T::of_usize(c)).collect();
    let freq: Vec<T> = frequency.iter().map(|&c| T::of_usize(c)).collect();
    Ok(PopFreqSeries {
        pearson: pearson(&pop, &freq).ok(),
        spearman: spearman(&pop, &freq).ok(),
        popularity,
        frequency,
    })
}

/// CSV `item,popularity,frequency` in item-id order.
pub fn write_pop_freq_csv<T: Scalar, W: Write>(
    out: W,
    train: &InteractionDataset<T>,
    series: &PopFreqSeries<T>,
) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(["item", "popularity", "frequency"])?;
    for (i, (p, f)) in series.popularity.iter().zip(&series.frequency).enumerate() {
        writer.write_record([
            train.item_key(ItemId::from_index(i)),
            &p.to_string(),
            &f.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
