//! Synthetic popularity-skewed interaction data.
//!
//! Items are indexed by popularity rank (`i0` is the head of the Zipf law).
//! Each user mixes the Zipf law with the uniform law over the catalog, the
//! Zipf share being the user's popularity affinity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DatasetBuilder, InteractionDataset};

/// Smallest generated profile, matching the split eligibility threshold.
const MIN_PROFILE: usize = crate::ingest::MIN_TEST_PROFILE;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub genres: usize,
    pub zipf_exponent: f64,
    pub mean_profile_size: usize,
    pub range_min: f64,
    pub range_max: f64,
    /// Affinities are drawn uniformly from `[affinity_min, affinity_max]`.
    pub affinity_min: f64,
    pub affinity_max: f64,
    /// Strength in `[0, 1]` of the link between an item's popularity rank and
    /// its mean rating. `0` draws every rating uniformly from the range.
    pub quality_weight: f64,
    /// Standard deviation of rating noise around the item mean, as a fraction
    /// of the range width. Unused when `quality_weight` is 0.
    pub rating_noise: f64,
    /// Zipf exponent of the genre law for head items; tail items draw genres
    /// uniformly. `0` gives every item a uniformly random genre.
    pub genre_skew: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 300,
            items: 500,
            genres: 10,
            zipf_exponent: 1.0,
            mean_profile_size: 40,
            range_min: 1.0,
            range_max: 5.0,
            affinity_min: 0.0,
            affinity_max: 1.0,
            quality_weight: 0.0,
            rating_noise: 0.2,
            genre_skew: 0.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    /// Defaults plus a popularity-linked rating mean and mainstream genres in
    /// the head, the structure real catalogs show and the uniform defaults lack.
    pub fn desk_scale() -> Self {
        Self {
            quality_weight: 0.5,
            rating_noise: 0.15,
            genre_skew: 2.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.users == 0 || self.items == 0 || self.genres == 0 {
            problems.push("users, items and genres must be positive".to_owned());
        }
        if self.mean_profile_size == 0 || self.mean_profile_size > self.items {
            problems.push(format!(
                "mean_profile_size must lie in [1, items], got {}",
                self.mean_profile_size
            ));
        }
        if !(self.zipf_exponent > 0.0 && self.zipf_exponent.is_finite()) {
            problems.push(format!(
                "zipf_exponent must be > 0, got {}",
                self.zipf_exponent
            ));
        }
        if !(self.range_min < self.range_max) {
            problems.push("range_min must be below range_max".to_owned());
        }
        if !(0.0 <= self.affinity_min
            && self.affinity_min <= self.affinity_max
            && self.affinity_max <= 1.0)
        {
            problems.push("affinity bounds must satisfy 0 <= min <= max <= 1".to_owned());
        }
        if !(0.0..=1.0).contains(&self.quality_weight) {
            problems.push(format!(
                "quality_weight must lie in [0, 1], got {}",
                self.quality_weight
            ));
        }
        if !(self.rating_noise >= 0.0 && self.rating_noise.is_finite()) {
            problems.push(format!(
                "rating_noise must be >= 0, got {}",
                self.rating_noise
            ));
        }
        if !(self.genre_skew >= 0.0 && self.genre_skew.is_finite()) {
            problems.push(format!("genre_skew must be >= 0, got {}", self.genre_skew));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// Generated dataset plus the latent per-user affinities (indexed by user id).
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: InteractionDataset<f64>,
    pub affinity: Vec<f64>,
}

pub fn generate(config: &SynthConfig) -> Result<InteractionDataset<f64>> {
    generate_with_affinity(config).map(|out| out.dataset)
}

pub fn generate_with_affinity(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let zipf_cdf = zipf_cdf(config.items, config.zipf_exponent);
    let zipf_pmf: Vec<f64> = std::iter::once(zipf_cdf[0])
        .chain(zipf_cdf.windows(2).map(|w| w[1] - w[0]))
        .collect();

    let item_genre: Vec<usize> = (0..config.items)
        .map(|rank| {
            if config.genre_skew > 0.0 {
                let exponent = config.genre_skew * headness(rank, config.items);
                let weights = (1..=config.genres).map(|g| (g as f64).powf(-exponent));
                WeightedIndex::new(weights)
                    .expect("genre weights are positive")
                    .sample(&mut rng)
            } else {
                rng.random_range(0..config.genres)
            }
        })
        .collect();
    let width = config.range_max - config.range_min;
    let noise = Normal::new(0.0, config.rating_noise * width)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let poisson = Poisson::new(config.mean_profile_size as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut builder = DatasetBuilder::new(config.range_min, config.range_max)?;
    let mut affinity = Vec::with_capacity(config.users);
    let mut taken = vec![false; config.items];
    let mut profile = Vec::new();
    for u in 0..config.users {
        let a = if config.affinity_min == config.affinity_max {
            config.affinity_min
        } else {
            rng.random_range(config.affinity_min..=config.affinity_max)
        };
        affinity.push(a);

        let drawn = poisson.sample(&mut rng) as usize;
        let target = drawn.clamp(MIN_PROFILE.min(config.items), config.items);

        profile.clear();
        let mut attempts = 0usize;
        while profile.len() < target {
            let item = if attempts < 32 * target {
                attempts += 1;
                let candidate = sample_mixture(&mut rng, a, &zipf_cdf);
                if taken[candidate] {
                    continue;
                }
                candidate
            } else {
                // Exact conditional law of the rejection loop, used once
                // rejections dominate (profiles close to the catalog size).
                sample_remaining(&mut rng, a, &zipf_pmf, &taken)
            };
            taken[item] = true;
            profile.push(item);
        }

        let user_key = format!("u{u}");
        for &item in &profile {
            taken[item] = false;
            let value = if config.quality_weight > 0.0 {
                let h = headness(item, config.items);
                let mean = config.range_min + width * (0.5 + config.quality_weight * (h - 0.5));
                (mean + noise.sample(&mut rng)).clamp(config.range_min, config.range_max)
            } else {
                rng.random_range(config.range_min..=config.range_max)
            };
            builder
                .push_rating(&user_key, &format!("i{item}"), value)
                .expect("generated rating is unique and in range");
        }
    }
    for (item, g) in item_genre.iter().enumerate() {
        let genre = format!("g{g}");
        builder.add_genres(&format!("i{item}"), [genre.as_str()]);
    }
    let (dataset, _) = builder.build();
    Ok(SynthOutput { dataset, affinity })
}

/// `1` for the most popular rank, falling with log rank to `0` at the tail.
fn headness(rank: usize, items: usize) -> f64 {
    if items < 2 {
        return 1.0;
    }
    1.0 - ((rank + 1) as f64).ln() / (items as f64).ln()
}

/// Normalized cumulative Zipf weights `1 / rank^s`, rank starting at 1.
pub(crate) fn zipf_cdf(items: usize, exponent: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = (1..=items)
        .map(|rank| {
            acc += (rank as f64).powf(-exponent);
            acc
        })
        .collect();
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

fn sample_mixture<R: Rng>(rng: &mut R, affinity: f64, zipf_cdf: &[f64]) -> usize {
    if rng.random::<f64>() < affinity {
        let x: f64 = rng.random();
        zipf_cdf
            .partition_point(|&c| c <= x)
            .min(zipf_cdf.len() - 1)
    } else {
        rng.random_range(0..zipf_cdf.len())
    }
}

fn sample_remaining<R: Rng>(rng: &mut R, affinity: f64, zipf_pmf: &[f64], taken: &[bool]) -> usize {
    let uniform = (1.0 - affinity) / zipf_pmf.len() as f64;
    let weight = |i: usize| {
        if taken[i] {
            0.0
        } else {
            affinity * zipf_pmf[i] + uniform
        }
    };
    let total: f64 = (0..zipf_pmf.len()).map(weight).sum();
    let mut x = rng.random::<f64>() * total;
    let mut last_free = 0;
    for i in 0..zipf_pmf.len() {
        let w = weight(i);
        if w > 0.0 {
            last_free = i;
            if x < w {
                return i;
            }
            x -= w;
        }
    }
    last_free
}
