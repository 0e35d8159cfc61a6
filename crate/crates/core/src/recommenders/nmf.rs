use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{clip, Recommender};
use crate::error::{Error, Result};
use crate::model::{ItemId, SparseMatrix, UserId};
use crate::scalar::Scalar;

const DENOMINATOR_EPSILON: f64 = 1e-12;
const MODEL_HEADER: &str = "popbias-nmf 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NmfConfig {
    pub factors: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            factors: 15,
            iterations: 200,
            seed: 42,
        }
    }
}

/// Non-negative factorization `R ≈ W·H` fitted on observed entries only.
///
/// `W` is stored row-major as `users × factors`; `H` is stored transposed,
/// row-major as `items × factors`, so both factor vectors of a prediction are
/// contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfModel<T> {
    factors: usize,
    users: usize,
    items: usize,
    user_factors: Vec<T>,
    item_factors: Vec<T>,
    loss_history: Vec<T>,
    range: (T, T),
}

impl<T: Scalar> NmfModel<T> {
    /// Masked multiplicative updates on the squared error over observed
    /// entries:
    ///
    /// ```text
    /// W ← W ∘ (M∘R)Hᵀ / ((M∘WH)Hᵀ + ε)
    /// H ← H ∘ Wᵀ(M∘R) / (Wᵀ(M∘WH) + ε)
    /// ```
    ///
    /// Factors start uniform in (0, 1]. One loss value is recorded after
    /// each full sweep.
    pub fn fit(train: &SparseMatrix<T>, config: NmfConfig, range: (T, T)) -> Result<Self> {
        if config.factors == 0 || config.iterations == 0 {
            return Err(Error::InvalidArgument(
                "factors and iterations must be >= 1".into(),
            ));
        }
        if train.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let f = config.factors;
        let (users, items) = (train.num_rows(), train.num_cols());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut init =
            |len: usize| -> Vec<T> { (0..len).map(|_| T::of(1.0 - rng.random::<f64>())).collect() };
        let mut model = Self {
            factors: f,
            users,
            items,
            user_factors: init(users * f),
            item_factors: init(items * f),
            loss_history: Vec::with_capacity(config.iterations),
            range,
        };
        let eps = T::of(DENOMINATOR_EPSILON);

        for _ in 0..config.iterations {
            let item_factors = &model.item_factors;
            model
                .user_factors
                .par_chunks_mut(f)
                .enumerate()
                .for_each(|(u, w)| {
                    let (rated, values) = train.row(UserId::from_index(u));
                    let neighbours = rated
                        .iter()
                        .zip(values)
                        .map(|(i, &r)| (&item_factors[i.index() * f..(i.index() + 1) * f], r));
                    multiplicative_step(w, neighbours, eps);
                });

            let user_factors = &model.user_factors;
            model
                .item_factors
                .par_chunks_mut(f)
                .enumerate()
                .for_each(|(i, h)| {
                    let (raters, values) = train.col(ItemId::from_index(i));
                    let neighbours = raters
                        .iter()
                        .zip(values)
                        .map(|(u, &r)| (&user_factors[u.index() * f..(u.index() + 1) * f], r));
                    multiplicative_step(h, neighbours, eps);
                });

            let loss = model.masked_loss(train);
            model.loss_history.push(loss);
        }
        Ok(model)
    }

    /// Rebuild a model from explicit factors (`W` as users×factors, `H`
    /// transposed as items×factors).
    pub fn from_factors(
        factors: usize,
        user_factors: Vec<T>,
        item_factors: Vec<T>,
        range: (T, T),
    ) -> Result<Self> {
        if factors == 0
            || !user_factors.len().is_multiple_of(factors)
            || !item_factors.len().is_multiple_of(factors)
        {
            return Err(Error::InvalidArgument("factor shapes do not match".into()));
        }
        if user_factors
            .iter()
            .chain(&item_factors)
            .any(|&x| !(x >= T::zero()))
        {
            return Err(Error::InvalidArgument(
                "factors must be non-negative".into(),
            ));
        }
        Ok(Self {
            factors,
            users: user_factors.len() / factors,
            items: item_factors.len() / factors,
            user_factors,
            item_factors,
            loss_history: Vec::new(),
            range,
        })
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn loss_history(&self) -> &[T] {
        &self.loss_history
    }

    pub fn user_factors(&self) -> &[T] {
        &self.user_factors
    }

    /// `H` transposed: items × factors.
    pub fn item_factors(&self) -> &[T] {
        &self.item_factors
    }

    fn user_row(&self, user: UserId) -> &[T] {
        &self.user_factors[user.index() * self.factors..(user.index() + 1) * self.factors]
    }

    fn item_row(&self, item: ItemId) -> &[T] {
        &self.item_factors[item.index() * self.factors..(item.index() + 1) * self.factors]
    }

    /// Unclipped `(W·H)[user, item]`.
    pub fn reconstruct(&self, user: UserId, item: ItemId) -> T {
        dot(self.user_row(user), self.item_row(item))
    }

    /// Sum of squared residuals over the observed entries of `train`.
    pub fn masked_loss(&self, train: &SparseMatrix<T>) -> T {
        let per_row: Vec<T> = (0..train.num_rows())
            .into_par_iter()
            .map(|u| {
                let user = UserId::from_index(u);
                let (rated, values) = train.row(user);
                rated
                    .iter()
                    .zip(values)
                    .map(|(&i, &r)| {
                        let residual = r - self.reconstruct(user, i);
                        residual * residual
                    })
                    .sum()
            })
            .collect();
        per_row.into_iter().sum()
    }

    /// Versioned plain-text dump of configuration and factors.
    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let join = |values: &[T]| {
            values
                .iter()
                .map(|v| v.as_f64().to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(out, "{MODEL_HEADER}")?;
        writeln!(
            out,
            "users {} items {} factors {}",
            self.users, self.items, self.factors
        )?;
        writeln!(
            out,
            "range {} {}",
            self.range.0.as_f64(),
            self.range.1.as_f64()
        )?;
        writeln!(out, "loss {}", join(&self.loss_history))?;
        for row in self.user_factors.chunks(self.factors) {
            writeln!(out, "W {}", join(row))?;
        }
        for row in self.item_factors.chunks(self.factors) {
            writeln!(out, "H {}", join(row))?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(input: R) -> Result<Self> {
        let bad = |msg: &str| Error::ModelFormat(msg.to_owned());
        let mut lines = input.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| bad("truncated file"))?
                .map_err(|e| Error::ModelFormat(e.to_string()))
        };
        if next()? != MODEL_HEADER {
            return Err(bad("unsupported header"));
        }
        let parse_num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let dims = next()?;
        let dims: Vec<&str> = dims.split(' ').collect();
        if dims.len() != 6 || dims[0] != "users" || dims[2] != "items" || dims[4] != "factors" {
            return Err(bad("bad dimension line"));
        }
        let parse_count = |s: &str| s.parse::<usize>().map_err(|_| bad("bad count"));
        let (users, items, factors) = (
            parse_count(dims[1])?,
            parse_count(dims[3])?,
            parse_count(dims[5])?,
        );
        let range_line = next()?;
        let range: Vec<f64> = range_line
            .strip_prefix("range ")
            .ok_or_else(|| bad("missing range"))?
            .split(' ')
            .map(parse_num)
            .collect::<Result<_>>()?;
        if range.len() != 2 {
            return Err(bad("bad range"));
        }
        let values = |line: &str, tag: &str| -> Result<Vec<T>> {
            let rest = line
                .strip_prefix(tag)
                .ok_or_else(|| bad("unexpected line tag"))?
                .trim_start();
            if rest.is_empty() {
                return Ok(Vec::new());
            }
            rest.split(' ').map(|s| parse_num(s).map(T::of)).collect()
        };
        let loss_history = values(&next()?, "loss")?;
        let mut read_block = |rows: usize, tag: &str| -> Result<Vec<T>> {
            let mut out = Vec::with_capacity(rows * factors);
            for _ in 0..rows {
                let row = values(&next()?, tag)?;
                if row.len() != factors {
                    return Err(bad("factor row has wrong length"));
                }
                out.extend(row);
            }
            Ok(out)
        };
        let user_factors = read_block(users, "W")?;
        let item_factors = read_block(items, "H")?;
        let mut model = Self::from_factors(
            factors,
            user_factors,
            item_factors,
            (T::of(range[0]), T::of(range[1])),
        )?;
        model.users = users;
        model.items = items;
        model.loss_history = loss_history;
        Ok(model)
    }
}

/// One multiplicative update of a factor row given the opposite factor rows
/// and observed values it touches.
fn multiplicative_step<'a, T: Scalar>(
    row: &mut [T],
    observed: impl Iterator<Item = (&'a [T], T)>,
    eps: T,
) {
    let f = row.len();
    let mut numerator = vec![T::zero(); f];
    let mut denominator = vec![T::zero(); f];
    for (other, value) in observed {
        let predicted = dot(row, other);
        for k in 0..f {
            numerator[k] += value * other[k];
            denominator[k] += predicted * other[k];
        }
    }
    for k in 0..f {
        row[k] *= numerator[k] / (denominator[k] + eps);
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

impl<T: Scalar> Recommender<T> for NmfModel<T> {
    fn num_users(&self) -> usize {
        self.users
    }

    fn num_items(&self) -> usize {
        self.items
    }

    fn predict(&self, user: UserId, item: ItemId) -> Result<T> {
        if user.index() >= self.users {
            return Err(Error::UnknownUser(user));
        }
        if item.index() >= self.items {
            return Err(Error::UnknownItem(item));
        }
        Ok(clip(self.reconstruct(user, item), self.range))
    }
}
