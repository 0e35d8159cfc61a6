//! Canonical tab-separated dataset format, dataset statistics and the
//! per-user train/test split.
//!
//! Ratings file: `user \t item \t value`, one rating per line.
//! Genre file: `item \t genre1,genre2,...`.
//! Lines starting with `#` and blank lines are skipped in both.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DatasetBuilder, InteractionDataset, ItemId, RatingRejection};
use crate::scalar::Scalar;

/// Users with fewer ratings than this keep their whole profile in train.
pub const MIN_TEST_PROFILE: usize = 5;

/// Column positions in the ratings file. The canonical layout is `0, 1, 2`
/// with exactly three fields per line; any other layout only requires enough
/// fields to cover the highest index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingColumns {
    pub user: usize,
    pub item: usize,
    pub value: usize,
}

impl Default for RatingColumns {
    fn default() -> Self {
        Self {
            user: 0,
            item: 1,
            value: 2,
        }
    }
}

impl RatingColumns {
    fn is_canonical(&self) -> bool {
        *self == Self::default()
    }

    fn max_index(&self) -> usize {
        self.user.max(self.item).max(self.value)
    }
}

/// A freshly loaded dataset plus ingestion diagnostics.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub dataset: InteractionDataset<T>,
    /// Genre-file items that never appear in the ratings file.
    pub unknown_genre_items: usize,
}

/// Load the canonical ratings and genre files from disk.
pub fn load_dataset<T: Scalar>(
    ratings_path: &Path,
    genres_path: Option<&Path>,
    range: (T, T),
    columns: RatingColumns,
) -> Result<Loaded<T>> {
    let open = |path: &Path| {
        File::open(path)
            .map(BufReader::new)
            .map_err(|source| Error::Read {
                path: path.to_owned(),
                source,
            })
    };
    let ratings = open(ratings_path)?;
    let genres = genres_path.map(open).transpose()?;
    let loaded = read_dataset(
        ratings,
        &ratings_path.display().to_string(),
        genres.map(|g| (g, genres_path.unwrap().display().to_string())),
        range,
        columns,
    )?;
    if loaded.unknown_genre_items > 0 {
        log::warn!(
            "ignored {} genre-file item(s) without ratings",
            loaded.unknown_genre_items
        );
    }
    Ok(loaded)
}

/// Parse a dataset from readers. `ratings_name` and the genre name only label
/// error messages.
pub fn read_dataset<T: Scalar, R: BufRead, G: BufRead>(
    ratings: R,
    ratings_name: &str,
    genres: Option<(G, String)>,
    range: (T, T),
    columns: RatingColumns,
) -> Result<Loaded<T>> {
    let mut builder = DatasetBuilder::new(range.0, range.1)?;
    let parse_error = |path: &str, line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };

    for (idx, line) in ratings.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| parse_error(ratings_name, lineno, e.to_string()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if skip_line(line) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let arity_ok = if columns.is_canonical() {
            fields.len() == 3
        } else {
            fields.len() > columns.max_index()
        };
        if !arity_ok {
            return Err(parse_error(
                ratings_name,
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let (user, item, raw) = (
            fields[columns.user],
            fields[columns.item],
            fields[columns.value],
        );
        let value: f64 = raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| {
                parse_error(ratings_name, lineno, format!("non-numeric rating '{raw}'"))
            })?;
        builder
            .push_rating(user, item, T::of(value))
            .map_err(|rejection| match rejection {
                RatingRejection::OutOfRange => Error::RatingOutOfRange {
                    path: ratings_name.to_owned(),
                    line: lineno,
                    value,
                    min: range.0.as_f64(),
                    max: range.1.as_f64(),
                },
                RatingRejection::Duplicate => Error::DuplicateRating {
                    path: ratings_name.to_owned(),
                    line: lineno,
                    user: user.to_owned(),
                    item: item.to_owned(),
                },
            })?;
    }

    if let Some((reader, name)) = genres {
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| parse_error(&name, lineno, e.to_string()))?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if skip_line(line) {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(parse_error(
                    &name,
                    lineno,
                    format!("expected 2 tab-separated fields, found {}", fields.len()),
                ));
            }
            builder.add_genres(fields[0], fields[1].split(',').filter(|g| !g.is_empty()));
        }
    }

    let (dataset, unknown_genre_items) = builder.build();
    Ok(Loaded {
        dataset,
        unknown_genre_items,
    })
}

fn skip_line(line: &str) -> bool {
    line.is_empty() || line.starts_with('#')
}

/// Write the canonical ratings and genre files. Reading them back with
/// [`load_dataset`] reproduces the dataset exactly.
pub fn write_dataset<T: Scalar>(
    dataset: &InteractionDataset<T>,
    ratings_path: &Path,
    genres_path: &Path,
) -> Result<()> {
    let write_err = |path: &Path| {
        let path = path.to_owned();
        move |source| Error::Write { path, source }
    };
    let mut out = BufWriter::new(File::create(ratings_path).map_err(write_err(ratings_path))?);
    write_ratings(dataset, &mut out).map_err(write_err(ratings_path))?;
    out.flush().map_err(write_err(ratings_path))?;

    let mut out = BufWriter::new(File::create(genres_path).map_err(write_err(genres_path))?);
    write_genres(dataset, &mut out).map_err(write_err(genres_path))?;
    out.flush().map_err(write_err(genres_path))
}

pub fn write_ratings<T: Scalar, W: Write>(
    dataset: &InteractionDataset<T>,
    out: &mut W,
) -> std::io::Result<()> {
    for r in dataset.ratings() {
        writeln!(
            out,
            "{}\t{}\t{}",
            dataset.user_key(r.user),
            dataset.item_key(r.item),
            r.value.as_f64()
        )?;
    }
    Ok(())
}

pub fn write_genres<T: Scalar, W: Write>(
    dataset: &InteractionDataset<T>,
    out: &mut W,
) -> std::io::Result<()> {
    for i in 0..dataset.num_items() {
        let item = ItemId::from_index(i);
        let genres = dataset.genres_of(item);
        if genres.is_empty() {
            continue;
        }
        let names: Vec<&str> = genres.iter().map(|&g| dataset.genre_key(g)).collect();
        writeln!(out, "{}\t{}", dataset.item_key(item), names.join(","))?;
    }
    Ok(())
}

/// Dataset summary: sizes, per-user and per-item means, sparsity and range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStatistics {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub genres: usize,
    pub ratings_per_user: f64,
    pub ratings_per_item: f64,
    pub sparsity: f64,
    pub range_min: f64,
    pub range_max: f64,
}

pub fn compute_statistics<T: Scalar>(dataset: &InteractionDataset<T>) -> Result<DatasetStatistics> {
    let (users, items, ratings) = (
        dataset.num_users(),
        dataset.num_items(),
        dataset.ratings().len(),
    );
    if users == 0 || items == 0 {
        return Err(Error::EmptyDataset);
    }
    let r = ratings as f64;
    Ok(DatasetStatistics {
        users,
        items,
        ratings,
        genres: dataset.num_genres(),
        ratings_per_user: r / users as f64,
        ratings_per_item: r / items as f64,
        sparsity: 1.0 - r / (users as f64 * items as f64),
        range_min: dataset.range().0.as_f64(),
        range_max: dataset.range().1.as_f64(),
    })
}

/// Per-user random holdout.
///
/// Every user with at least [`MIN_TEST_PROFILE`] ratings sends
/// `round(test_fraction * profile_size)` of them to test. Both halves keep the
/// source's id spaces and preserve the source rating order.
pub fn train_test_split<T: Scalar>(
    dataset: &InteractionDataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(InteractionDataset<T>, InteractionDataset<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_users()];
    for (idx, r) in dataset.ratings().iter().enumerate() {
        by_user[r.user.index()].push(idx);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; dataset.ratings().len()];
    for profile in by_user.iter_mut() {
        if profile.len() < MIN_TEST_PROFILE {
            continue;
        }
        let take = (test_fraction * profile.len() as f64).round() as usize;
        profile.shuffle(&mut rng);
        for &idx in &profile[..take] {
            in_test[idx] = true;
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (idx, &r) in dataset.ratings().iter().enumerate() {
        if in_test[idx] {
            test.push(r);
        } else {
            train.push(r);
        }
    }
    Ok((dataset.with_ratings(train), dataset.with_ratings(test)))
}

/// Profile size of a user in a dataset; a helper for callers that want
/// per-user counts without building a matrix.
pub fn profile_sizes<T: Scalar>(dataset: &InteractionDataset<T>) -> Vec<usize> {
    let mut sizes = vec![0; dataset.num_users()];
    for r in dataset.ratings() {
        sizes[r.user.index()] += 1;
    }
    sizes
}
