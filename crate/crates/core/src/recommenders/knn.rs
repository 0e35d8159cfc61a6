use std::cmp::Ordering;

use rayon::prelude::*;

use super::{clip, Recommender};
use crate::error::{Error, Result};
use crate::model::{ItemId, SparseMatrix, UserId};
use crate::scalar::Scalar;

/// User-based k-nearest-neighbour rating predictor.
///
/// Similarity is the cosine of two users' raw rating vectors restricted to
/// the items both rated; users without co-rated items have similarity 0.
/// The full user×user similarity matrix is computed at fit time.
#[derive(Debug, Clone)]
pub struct KnnModel<T> {
    k: usize,
    train: SparseMatrix<T>,
    user_means: Vec<T>,
    similarity: Vec<T>,
    range: (T, T),
}

impl<T: Scalar> KnnModel<T> {
    pub fn fit(train: &SparseMatrix<T>, k: usize, range: (T, T)) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if train.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let n = train.num_rows();
        let global_mean = train.entries().map(|r| r.value).sum::<T>() / T::of_usize(train.nnz());
        let user_means = (0..n)
            .map(|u| {
                let (_, values) = train.row(UserId::from_index(u));
                if values.is_empty() {
                    global_mean
                } else {
                    values.iter().copied().sum::<T>() / T::of_usize(values.len())
                }
            })
            .collect();

        let mut similarity = vec![T::zero(); n * n];
        similarity
            .par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(u, row)| similarity_row(train, UserId::from_index(u), row));

        Ok(Self {
            k,
            train: train.clone(),
            user_means,
            similarity,
            range,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn similarity(&self, u: UserId, v: UserId) -> T {
        self.similarity[u.index() * self.train.num_rows() + v.index()]
    }

    pub fn user_mean(&self, user: UserId) -> T {
        self.user_means[user.index()]
    }

    fn check_user(&self, user: UserId) -> Result<()> {
        if user.index() < self.train.num_rows() {
            Ok(())
        } else {
            Err(Error::UnknownUser(user))
        }
    }

    fn finish(&self, user: UserId, numerator: T, denominator: T) -> T {
        let mean = self.user_mean(user);
        if denominator > T::zero() {
            clip(mean + numerator / denominator, self.range)
        } else {
            clip(mean, self.range)
        }
    }
}

/// Similarity ordering: higher similarity first, then lower user id.
fn by_similarity<T: Scalar>(a: &(T, UserId), b: &(T, UserId)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

fn similarity_row<T: Scalar>(train: &SparseMatrix<T>, user: UserId, out: &mut [T]) {
    let n = out.len();
    let mut dot = vec![T::zero(); n];
    let mut own_norm = vec![T::zero(); n];
    let mut other_norm = vec![T::zero(); n];
    let mut touched = vec![false; n];
    let (items, values) = train.row(user);
    for (&item, &r_u) in items.iter().zip(values) {
        let (users, others) = train.col(item);
        for (&v, &r_v) in users.iter().zip(others) {
            let v = v.index();
            dot[v] += r_u * r_v;
            own_norm[v] += r_u * r_u;
            other_norm[v] += r_v * r_v;
            touched[v] = true;
        }
    }
    for v in 0..n {
        out[v] = if v == user.index() || !touched[v] {
            T::zero()
        } else {
            let denom = (own_norm[v] * other_norm[v]).sqrt();
            if denom > T::zero() {
                (dot[v] / denom).max(-T::one()).min(T::one())
            } else {
                T::zero()
            }
        };
    }
}

impl<T: Scalar> Recommender<T> for KnnModel<T> {
    fn num_users(&self) -> usize {
        self.train.num_rows()
    }

    fn num_items(&self) -> usize {
        self.train.num_cols()
    }

    /// Mean-centred weighted average over the `k` most similar users who
    /// rated the item with positive similarity; falls back to the user mean.
    fn predict(&self, user: UserId, item: ItemId) -> Result<T> {
        self.check_user(user)?;
        if item.index() >= self.train.num_cols() {
            return Err(Error::UnknownItem(item));
        }
        let (raters, values) = self.train.col(item);
        let mut neighbors: Vec<(T, UserId, T)> = raters
            .iter()
            .zip(values)
            .filter(|(&v, _)| v != user)
            .map(|(&v, &r)| (self.similarity(user, v), v, r))
            .filter(|&(s, _, _)| s > T::zero())
            .collect();
        neighbors.sort_by(|a, b| by_similarity(&(a.0, a.1), &(b.0, b.1)));

        let (mut numerator, mut denominator) = (T::zero(), T::zero());
        for &(s, v, r) in neighbors.iter().take(self.k) {
            numerator += s * (r - self.user_mean(v));
            denominator += s.abs();
        }
        Ok(self.finish(user, numerator, denominator))
    }

    /// Walks neighbours once in similarity order and lets each item take
    /// contributions from its first `k` raters, which reproduces
    /// [`KnnModel::predict`] term by term.
    fn score_all(&self, user: UserId) -> Result<Vec<T>> {
        self.check_user(user)?;
        let n = self.train.num_rows();
        let mut neighbors: Vec<(T, UserId)> = (0..n)
            .map(UserId::from_index)
            .filter(|&v| v != user)
            .map(|v| (self.similarity(user, v), v))
            .filter(|&(s, _)| s > T::zero())
            .collect();
        neighbors.sort_by(by_similarity);

        let items = self.train.num_cols();
        let mut numerator = vec![T::zero(); items];
        let mut denominator = vec![T::zero(); items];
        let mut used = vec![0usize; items];
        for &(s, v) in &neighbors {
            let mean_v = self.user_mean(v);
            let (rated, values) = self.train.row(v);
            for (&i, &r) in rated.iter().zip(values) {
                let i = i.index();
                if used[i] < self.k {
                    numerator[i] += s * (r - mean_v);
                    denominator[i] += s.abs();
                    used[i] += 1;
                }
            }
        }
        Ok((0..items)
            .map(|i| self.finish(user, numerator[i], denominator[i]))
            .collect())
    }
}
