//! Domain types: dense identifiers, the interaction dataset, the sparse
//! user×item matrix and genre distributions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }

            #[inline]
            pub fn from_index(index: usize) -> Self {
                Self(u32::try_from(index).expect("id space exceeds u32"))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "#{}"), self.0)
            }
        }
    };
}

dense_id!(
    /// 0-based user index, assigned in first-appearance order.
    UserId,
    "user"
);
dense_id!(
    /// 0-based item index, assigned in first-appearance order.
    ItemId,
    "item"
);
dense_id!(
    /// 0-based genre index.
    GenreId,
    "genre"
);

/// Bijection between external string keys and dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    keys: IndexSet<String>,
}

impl IdMap {
    fn intern(&mut self, key: &str) -> usize {
        match self.keys.get_index_of(key) {
            Some(index) => index,
            None => self.keys.insert_full(key.to_owned()).0,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// External key of a dense index.
    pub fn key(&self, index: usize) -> Option<&str> {
        self.keys.get_index(index).map(String::as_str)
    }

    /// Dense index of an external key.
    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.keys.get_index_of(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating<T> {
    pub user: UserId,
    pub item: ItemId,
    pub value: T,
}

/// Users, items, ratings and genre assignments after ingestion.
///
/// Construct through [`DatasetBuilder`]; the result is immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset<T> {
    users: IdMap,
    items: IdMap,
    genres: IdMap,
    ratings: Vec<Rating<T>>,
    genres_of: Vec<Vec<GenreId>>,
    range: (T, T),
}

impl<T: Scalar> InteractionDataset<T> {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// Number of distinct genres referenced by at least one item.
    pub fn num_genres(&self) -> usize {
        self.genres.len()
    }

    pub fn ratings(&self) -> &[Rating<T>] {
        &self.ratings
    }

    pub fn range(&self) -> (T, T) {
        self.range
    }

    pub fn user_ids(&self) -> &IdMap {
        &self.users
    }

    pub fn item_ids(&self) -> &IdMap {
        &self.items
    }

    pub fn genre_ids(&self) -> &IdMap {
        &self.genres
    }

    /// Genres of an item, ascending by id; possibly empty.
    pub fn genres_of(&self, item: ItemId) -> &[GenreId] {
        &self.genres_of[item.index()]
    }

    pub fn user_key(&self, user: UserId) -> &str {
        self.users.key(user.index()).expect("valid user id")
    }

    pub fn item_key(&self, item: ItemId) -> &str {
        self.items.key(item.index()).expect("valid item id")
    }

    pub fn genre_key(&self, genre: GenreId) -> &str {
        self.genres.key(genre.index()).expect("valid genre id")
    }

    /// Same id spaces, genres and range, different ratings. Used for train/test
    /// partitions so ids stay comparable across the split.
    pub(crate) fn with_ratings(&self, ratings: Vec<Rating<T>>) -> Self {
        Self {
            users: self.users.clone(),
            items: self.items.clone(),
            genres: self.genres.clone(),
            ratings,
            genres_of: self.genres_of.clone(),
            range: self.range,
        }
    }

    /// Genre distribution of a set of items.
    ///
    /// Each item spreads unit weight evenly across its genres; genre-less items
    /// contribute nothing. If no item carries a genre the explicitly empty
    /// distribution is returned.
    pub fn genre_distribution(&self, items: &[ItemId]) -> Result<GenreDistribution<T>> {
        if items.is_empty() {
            return Err(Error::EmptyItemSet);
        }
        let mut weights: BTreeMap<GenreId, T> = BTreeMap::new();
        for &item in items {
            let genres = self
                .genres_of
                .get(item.index())
                .ok_or(Error::UnknownItem(item))?;
            if genres.is_empty() {
                continue;
            }
            let share = T::one() / T::of_usize(genres.len());
            for &g in genres {
                *weights.entry(g).or_insert_with(T::zero) += share;
            }
        }
        Ok(GenreDistribution::from_weights(weights))
    }
}

/// Incremental constructor that assigns dense ids by first appearance and
/// enforces the dataset invariants.
#[derive(Debug)]
pub struct DatasetBuilder<T> {
    users: IdMap,
    items: IdMap,
    ratings: Vec<Rating<T>>,
    seen: HashSet<(UserId, ItemId)>,
    pending_genres: HashMap<String, Vec<String>>,
    range: (T, T),
}

/// Why a single rating was rejected by [`DatasetBuilder::push_rating`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingRejection {
    OutOfRange,
    Duplicate,
}

impl<T: Scalar> DatasetBuilder<T> {
    pub fn new(range_min: T, range_max: T) -> Result<Self> {
        if !(range_min < range_max) {
            return Err(Error::InvalidArgument(format!(
                "rating range [{range_min}, {range_max}] is empty"
            )));
        }
        Ok(Self {
            users: IdMap::default(),
            items: IdMap::default(),
            ratings: Vec::new(),
            seen: HashSet::new(),
            pending_genres: HashMap::new(),
            range: (range_min, range_max),
        })
    }

    pub fn push_rating(
        &mut self,
        user: &str,
        item: &str,
        value: T,
    ) -> std::result::Result<(), RatingRejection> {
        let (lo, hi) = self.range;
        if !(value >= lo && value <= hi) {
            return Err(RatingRejection::OutOfRange);
        }
        if let (Some(u), Some(i)) = (self.users.index_of(user), self.items.index_of(item)) {
            if self
                .seen
                .contains(&(UserId::from_index(u), ItemId::from_index(i)))
            {
                return Err(RatingRejection::Duplicate);
            }
        }
        let user = UserId::from_index(self.users.intern(user));
        let item = ItemId::from_index(self.items.intern(item));
        self.seen.insert((user, item));
        self.ratings.push(Rating { user, item, value });
        Ok(())
    }

    /// Attach genres to an item key. Repeated calls for the same item merge.
    pub fn add_genres<'a>(&mut self, item: &str, genres: impl IntoIterator<Item = &'a str>) {
        let entry = self.pending_genres.entry(item.to_owned()).or_default();
        for g in genres {
            if !entry.iter().any(|known| known == g) {
                entry.push(g.to_owned());
            }
        }
    }

    /// Finish construction. Returns the dataset and the number of genre-tagged
    /// item keys that never appeared in a rating (and were dropped).
    ///
    /// Genre ids are assigned by first appearance while scanning items in id
    /// order, so the result does not depend on genre-record order.
    pub fn build(mut self) -> (InteractionDataset<T>, usize) {
        let mut genres = IdMap::default();
        let mut genres_of = Vec::with_capacity(self.items.len());
        for key in self.items.keys() {
            let mut ids: Vec<GenreId> = self
                .pending_genres
                .remove(key)
                .unwrap_or_default()
                .iter()
                .map(|g| GenreId::from_index(genres.intern(g)))
                .collect();
            ids.sort_unstable();
            genres_of.push(ids);
        }
        let dropped = self.pending_genres.len();
        let dataset = InteractionDataset {
            users: self.users,
            items: self.items,
            genres,
            ratings: self.ratings,
            genres_of,
            range: self.range,
        };
        (dataset, dropped)
    }
}

/// Observed user×item ratings with both row (user) and column (item) indexes.
///
/// Rows are sorted by item id and columns by user id, so every traversal order
/// is independent of the order ratings were supplied in.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    row_items: Vec<ItemId>,
    row_values: Vec<T>,
    col_ptr: Vec<usize>,
    col_users: Vec<UserId>,
    col_values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn from_dataset(dataset: &InteractionDataset<T>) -> Self {
        Self::from_ratings(dataset.num_users(), dataset.num_items(), dataset.ratings())
    }

    /// Build from explicit ratings. Panics on out-of-bounds ids; duplicate
    /// (user, item) pairs are a caller error.
    pub fn from_ratings(rows: usize, cols: usize, ratings: &[Rating<T>]) -> Self {
        let mut by_row: Vec<&Rating<T>> = ratings.iter().collect();
        by_row.sort_by_key(|r| (r.user, r.item));
        let mut row_ptr = vec![0usize; rows + 1];
        for r in &by_row {
            assert!(
                r.user.index() < rows && r.item.index() < cols,
                "rating out of bounds"
            );
            row_ptr[r.user.index() + 1] += 1;
        }
        for u in 0..rows {
            row_ptr[u + 1] += row_ptr[u];
        }
        let row_items = by_row.iter().map(|r| r.item).collect();
        let row_values = by_row.iter().map(|r| r.value).collect();

        let mut by_col = by_row;
        by_col.sort_by_key(|r| (r.item, r.user));
        let mut col_ptr = vec![0usize; cols + 1];
        for r in &by_col {
            col_ptr[r.item.index() + 1] += 1;
        }
        for i in 0..cols {
            col_ptr[i + 1] += col_ptr[i];
        }
        let col_users = by_col.iter().map(|r| r.user).collect();
        let col_values = by_col.iter().map(|r| r.value).collect();

        Self {
            rows,
            cols,
            row_ptr,
            row_items,
            row_values,
            col_ptr,
            col_users,
            col_values,
        }
    }

    /// Convenience constructor from `(row, col, value)` triplets.
    pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, T)]) -> Self {
        let ratings: Vec<Rating<T>> = entries
            .iter()
            .map(|&(u, i, value)| Rating {
                user: UserId::from_index(u),
                item: ItemId::from_index(i),
                value,
            })
            .collect();
        Self::from_ratings(rows, cols, &ratings)
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.row_items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    /// Items and values of a user's profile, ascending by item.
    pub fn row(&self, user: UserId) -> (&[ItemId], &[T]) {
        let span = self.row_ptr[user.index()]..self.row_ptr[user.index() + 1];
        (&self.row_items[span.clone()], &self.row_values[span])
    }

    /// Users and values observed for an item, ascending by user.
    pub fn col(&self, item: ItemId) -> (&[UserId], &[T]) {
        let span = self.col_ptr[item.index()]..self.col_ptr[item.index() + 1];
        (&self.col_users[span.clone()], &self.col_values[span])
    }

    pub fn row_len(&self, user: UserId) -> usize {
        self.row_ptr[user.index() + 1] - self.row_ptr[user.index()]
    }

    pub fn col_len(&self, item: ItemId) -> usize {
        self.col_ptr[item.index() + 1] - self.col_ptr[item.index()]
    }

    pub fn get(&self, user: UserId, item: ItemId) -> Option<T> {
        let (items, values) = self.row(user);
        items.binary_search(&item).ok().map(|pos| values[pos])
    }

    /// All entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = Rating<T>> + '_ {
        (0..self.rows).flat_map(move |u| {
            let user = UserId::from_index(u);
            let (items, values) = self.row(user);
            items
                .iter()
                .zip(values)
                .map(move |(&item, &value)| Rating { user, item, value })
        })
    }

    /// All entries in column-major order.
    pub fn entries_by_col(&self) -> impl Iterator<Item = Rating<T>> + '_ {
        (0..self.cols).flat_map(move |i| {
            let item = ItemId::from_index(i);
            let (users, values) = self.col(item);
            users
                .iter()
                .zip(values)
                .map(move |(&user, &value)| Rating { user, item, value })
        })
    }
}

/// Probability mass over genres. Either sums to one or is explicitly empty.
#[derive(Debug, Clone, PartialEq)]
pub struct GenreDistribution<T> {
    mass: BTreeMap<GenreId, T>,
}

impl<T: Scalar> GenreDistribution<T> {
    pub fn empty() -> Self {
        Self {
            mass: BTreeMap::new(),
        }
    }

    /// Normalize non-negative weights. Zero weights are dropped; an all-zero
    /// input yields the empty distribution.
    pub fn from_weights(weights: impl IntoIterator<Item = (GenreId, T)>) -> Self {
        let mut mass: BTreeMap<GenreId, T> = BTreeMap::new();
        for (g, w) in weights {
            assert!(w >= T::zero(), "negative genre weight");
            if w > T::zero() {
                *mass.entry(g).or_insert_with(T::zero) += w;
            }
        }
        let total: T = mass.values().copied().sum();
        if total > T::zero() {
            for w in mass.values_mut() {
                *w /= total;
            }
        }
        Self { mass }
    }

    /// Dense weights indexed by genre id.
    pub fn from_dense(weights: &[T]) -> Self {
        Self::from_weights(
            weights
                .iter()
                .enumerate()
                .map(|(g, &w)| (GenreId::from_index(g), w)),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self, genre: GenreId) -> T {
        self.mass.get(&genre).copied().unwrap_or_else(T::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (GenreId, T)> + '_ {
        self.mass.iter().map(|(&g, &m)| (g, m))
    }

    pub fn total(&self) -> T {
        self.mass.values().copied().sum()
    }
}
