//! Rating predictors and top-n list generation.

mod knn;
mod nmf;

pub use knn::KnnModel;
pub use nmf::{NmfConfig, NmfModel};

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ItemId, SparseMatrix, UserId};
use crate::scalar::Scalar;

pub const DEFAULT_NEIGHBORS: usize = 40;
pub const DEFAULT_LIST_LENGTH: usize = 10;

/// A fitted model that predicts ratings.
pub trait Recommender<T: Scalar>: Sync {
    fn num_users(&self) -> usize;

    fn num_items(&self) -> usize;

    /// Predicted rating, clipped to the training rating range.
    fn predict(&self, user: UserId, item: ItemId) -> Result<T>;

    /// Predictions for every item in id order. Implementations may batch,
    /// but must agree exactly with [`Recommender::predict`].
    fn score_all(&self, user: UserId) -> Result<Vec<T>> {
        (0..self.num_items())
            .map(|i| self.predict(user, ItemId::from_index(i)))
            .collect()
    }
}

/// Ranked recommendations for one user, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationList<T> {
    pub user: UserId,
    pub entries: Vec<(ItemId, T)>,
}

impl<T: Copy> RecommendationList<T> {
    pub fn items(&self) -> Vec<ItemId> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Top-`n` unseen items for a user, ordered by score (descending), then
/// training popularity (descending), then item id.
pub fn top_n<T: Scalar, M: Recommender<T> + ?Sized>(
    model: &M,
    user: UserId,
    n: usize,
    train: &SparseMatrix<T>,
) -> Result<RecommendationList<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("list length n must be >= 1".into()));
    }
    if user.index() >= train.num_rows() {
        return Err(Error::UnknownUser(user));
    }
    let scores = model.score_all(user)?;
    let (seen, _) = train.row(user);
    let mut seen_iter = seen.iter().peekable();
    let mut candidates: Vec<(ItemId, T)> =
        Vec::with_capacity(scores.len() - seen.len().min(scores.len()));
    for (i, &score) in scores.iter().enumerate() {
        let item = ItemId::from_index(i);
        if seen_iter.peek() == Some(&&item) {
            seen_iter.next();
            continue;
        }
        candidates.push((item, score));
    }

    let order = |a: &(ItemId, T), b: &(ItemId, T)| -> Ordering {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| train.col_len(b.0).cmp(&train.col_len(a.0)))
            .then_with(|| a.0.cmp(&b.0))
    };
    if candidates.len() > n {
        candidates.select_nth_unstable_by(n - 1, order);
        candidates.truncate(n);
    }
    candidates.sort_by(order);
    Ok(RecommendationList {
        user,
        entries: candidates,
    })
}

/// Lists for every user, in user-id order.
pub fn recommend_all<T: Scalar, M: Recommender<T> + ?Sized>(
    model: &M,
    n: usize,
    train: &SparseMatrix<T>,
) -> Result<Vec<RecommendationList<T>>> {
    (0..train.num_rows())
        .into_par_iter()
        .map(|u| top_n(model, UserId::from_index(u), n, train))
        .collect()
}

#[inline]
pub(crate) fn clip<T: Scalar>(value: T, (lo, hi): (T, T)) -> T {
    value.max(lo).min(hi)
}
