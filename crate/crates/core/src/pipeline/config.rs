use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::ingest::RatingColumns;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    UserKnn,
    Nmf,
}

impl Algorithm {
    /// Name used in config values and output file names.
    pub fn key(self) -> &'static str {
        match self {
            Algorithm::UserKnn => "userknn",
            Algorithm::Nmf => "nmf",
        }
    }

    /// Name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::UserKnn => "UserKNN",
            Algorithm::Nmf => "NMF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlgorithmSelection {
    UserKnn,
    Nmf,
    #[default]
    Both,
}

impl AlgorithmSelection {
    pub fn algorithms(self) -> &'static [Algorithm] {
        match self {
            AlgorithmSelection::UserKnn => &[Algorithm::UserKnn],
            AlgorithmSelection::Nmf => &[Algorithm::Nmf],
            AlgorithmSelection::Both => &[Algorithm::UserKnn, Algorithm::Nmf],
        }
    }
}

impl FromStr for AlgorithmSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "userknn" => Ok(Self::UserKnn),
            "nmf" => Ok(Self::Nmf),
            "both" => Ok(Self::Both),
            _ => Err("expected userknn, nmf or both".into()),
        }
    }
}

impl fmt::Display for AlgorithmSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::UserKnn => "userknn",
            Self::Nmf => "nmf",
            Self::Both => "both",
        })
    }
}

/// Which ratings define item popularity and user inclination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PopularitySource {
    #[default]
    Train,
    /// Train and test together; leaks test interactions into the grouping.
    Full,
}

impl FromStr for PopularitySource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "full" => Ok(Self::Full),
            _ => Err("expected train or full".into()),
        }
    }
}

impl fmt::Display for PopularitySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        ratings: PathBuf,
        genres: Option<PathBuf>,
        columns: RatingColumns,
    },
    Synth(SynthConfig),
}

/// Effective configuration of one audit run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: DataSource,
    pub range: (f64, f64),
    pub algorithms: AlgorithmSelection,
    pub k: usize,
    pub factors: usize,
    pub iterations: usize,
    pub n: usize,
    pub test_fraction: f64,
    pub alpha: f64,
    pub popularity: PopularitySource,
    /// Seeds the split and the NMF initialization.
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// Every problem found while validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.violations.join("; "))
    }
}

impl std::error::Error for ConfigError {}

pub const DEFAULT_OUTPUT_DIR: &str = "audit-out";

/// Recognized keys, their defaults and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    (
        "ratings",
        "",
        "ratings file (user<TAB>item<TAB>value); synthetic data when empty",
    ),
    ("genres", "", "genre file (item<TAB>g1,g2,...)"),
    ("range_min", "1", "lowest valid rating"),
    ("range_max", "5", "highest valid rating"),
    (
        "user_column",
        "0",
        "0-based user column in the ratings file",
    ),
    (
        "item_column",
        "1",
        "0-based item column in the ratings file",
    ),
    (
        "value_column",
        "2",
        "0-based rating column in the ratings file",
    ),
    ("algorithm", "both", "userknn, nmf or both"),
    ("k", "40", "UserKNN neighbours, >= 1"),
    ("factors", "15", "NMF latent factors, >= 1"),
    ("iterations", "200", "NMF update sweeps, >= 1"),
    ("n", "10", "recommendation list length, >= 1"),
    ("test_fraction", "0.2", "per-user test share, in (0, 1)"),
    ("alpha", "0.01", "miscalibration smoothing, in [0, 1)"),
    (
        "popularity_source",
        "train",
        "ratings defining popularity and groups: train or full",
    ),
    ("seed", "42", "split and NMF seed"),
    (
        "output_dir",
        DEFAULT_OUTPUT_DIR,
        "directory receiving all outputs",
    ),
    ("synth_users", "300", "synthetic users"),
    ("synth_items", "500", "synthetic items"),
    ("synth_genres", "10", "synthetic genres"),
    (
        "synth_zipf_exponent",
        "1",
        "Zipf exponent of item selection, > 0",
    ),
    (
        "synth_mean_profile_size",
        "40",
        "mean synthetic profile size",
    ),
    (
        "synth_affinity_min",
        "0",
        "lowest per-user popularity affinity",
    ),
    (
        "synth_affinity_max",
        "1",
        "highest per-user popularity affinity",
    ),
    (
        "synth_quality_weight",
        "0",
        "link between item rank and mean rating, in [0, 1]",
    ),
    (
        "synth_rating_noise",
        "0.2",
        "rating noise sd as a share of the range width",
    ),
    (
        "synth_genre_skew",
        "0",
        "Zipf exponent of head-item genres, >= 0",
    ),
    ("synth_seed", "42", "generator seed"),
];

/// Parse `key = value` text, apply `overrides` on top and validate.
///
/// Blank lines and lines starting with `#` are ignored. Every unknown key,
/// unparsable value and out-of-range value is reported in one error.
pub fn validate_config(
    text: &str,
    overrides: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let mut violations = Vec::new();
    let mut values: BTreeMap<&str, String> =
        KEYS.iter().map(|&(k, v, _)| (k, v.to_owned())).collect();
    let mut seen = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            violations.push(format!("line {}: expected key = value", idx + 1));
            continue;
        };
        let key = key.trim();
        match values.get_mut(key) {
            Some(slot) => {
                if let Some(first) = seen.insert(key.to_owned(), idx + 1) {
                    violations.push(format!(
                        "line {}: {key} already set on line {first}",
                        idx + 1
                    ));
                }
                *slot = value.trim().to_owned();
            }
            None => violations.push(format!("line {}: unknown key {key}", idx + 1)),
        }
    }
    for (key, value) in overrides {
        match values.get_mut(key.as_str()) {
            Some(slot) => *slot = value.trim().to_owned(),
            None => violations.push(format!("unknown key {key}")),
        }
    }

    let mut get = Getter {
        values: &values,
        violations: &mut violations,
    };
    let range_min: f64 = get.parse("range_min");
    let range_max: f64 = get.parse("range_max");
    let columns = RatingColumns {
        user: get.parse("user_column"),
        item: get.parse("item_column"),
        value: get.parse("value_column"),
    };
    let algorithms: AlgorithmSelection = get.parse("algorithm");
    let k = get.at_least("k", 1);
    let factors = get.at_least("factors", 1);
    let iterations = get.at_least("iterations", 1);
    let n = get.at_least("n", 1);
    let test_fraction: f64 = get.parse("test_fraction");
    let alpha: f64 = get.parse("alpha");
    let seed = get.parse("seed");
    let popularity: PopularitySource = get.parse("popularity_source");
    let synth = SynthConfig {
        users: get.parse("synth_users"),
        items: get.parse("synth_items"),
        genres: get.parse("synth_genres"),
        zipf_exponent: get.parse("synth_zipf_exponent"),
        mean_profile_size: get.parse("synth_mean_profile_size"),
        range_min,
        range_max,
        affinity_min: get.parse("synth_affinity_min"),
        affinity_max: get.parse("synth_affinity_max"),
        quality_weight: get.parse("synth_quality_weight"),
        rating_noise: get.parse("synth_rating_noise"),
        genre_skew: get.parse("synth_genre_skew"),
        seed: get.parse("synth_seed"),
    };

    if !(range_min < range_max) {
        violations.push(format!(
            "range_min {range_min} must be below range_max {range_max}"
        ));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        violations.push(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        ));
    }
    if !(0.0..1.0).contains(&alpha) {
        violations.push(format!("alpha must lie in [0, 1), got {alpha}"));
    }
    if columns.user == columns.item
        || columns.user == columns.value
        || columns.item == columns.value
    {
        violations.push("user_column, item_column and value_column must differ".into());
    }
    let ratings = &values["ratings"];
    let genres = &values["genres"];
    let source = if ratings.is_empty() {
        if !genres.is_empty() {
            violations.push("genres given without ratings".into());
        }
        if let Err(e) = synth.validate() {
            violations.push(e.to_string().replace("invalid argument: ", "synth: "));
        }
        DataSource::Synth(synth)
    } else {
        DataSource::Files {
            ratings: PathBuf::from(ratings),
            genres: (!genres.is_empty()).then(|| PathBuf::from(genres)),
            columns,
        }
    };
    let output_dir = &values["output_dir"];
    if output_dir.is_empty() {
        violations.push("output_dir must not be empty".into());
    }

    if !violations.is_empty() {
        return Err(ConfigError { violations });
    }
    Ok(RunConfig {
        source,
        range: (range_min, range_max),
        algorithms,
        k,
        factors,
        iterations,
        n,
        test_fraction,
        alpha,
        popularity,
        seed,
        output_dir: PathBuf::from(output_dir),
    })
}

struct Getter<'a> {
    values: &'a BTreeMap<&'static str, String>,
    violations: &'a mut Vec<String>,
}

impl Getter<'_> {
    /// Parsed value, or the type's default after recording a violation.
    fn parse<V: FromStr + Default>(&mut self, key: &str) -> V
    where
        V::Err: fmt::Display,
    {
        let raw = &self.values[key];
        raw.parse().unwrap_or_else(|e| {
            self.violations
                .push(format!("{key}: cannot parse '{raw}': {e}"));
            V::default()
        })
    }

    fn at_least(&mut self, key: &str, min: usize) -> usize {
        let raw = &self.values[key];
        match raw.parse::<usize>() {
            Ok(v) if v >= min => v,
            Ok(v) => {
                self.violations
                    .push(format!("{key} must be >= {min}, got {v}"));
                min
            }
            Err(e) => {
                self.violations
                    .push(format!("{key}: cannot parse '{raw}': {e}"));
                min
            }
        }
    }
}

impl RunConfig {
    /// Effective settings as `key -> value`, leaving out `output_dir` so that
    /// runs into different directories share a manifest.
    pub fn to_pairs(&self) -> BTreeMap<&'static str, String> {
        let mut pairs = BTreeMap::new();
        let mut put = |k: &'static str, v: String| {
            pairs.insert(k, v);
        };
        match &self.source {
            DataSource::Files {
                ratings,
                genres,
                columns,
            } => {
                put("ratings", ratings.display().to_string());
                put(
                    "genres",
                    genres
                        .as_ref()
                        .map(|g| g.display().to_string())
                        .unwrap_or_default(),
                );
                put("user_column", columns.user.to_string());
                put("item_column", columns.item.to_string());
                put("value_column", columns.value.to_string());
            }
            DataSource::Synth(s) => {
                put("synth_users", s.users.to_string());
                put("synth_items", s.items.to_string());
                put("synth_genres", s.genres.to_string());
                put("synth_zipf_exponent", s.zipf_exponent.to_string());
                put("synth_mean_profile_size", s.mean_profile_size.to_string());
                put("synth_affinity_min", s.affinity_min.to_string());
                put("synth_affinity_max", s.affinity_max.to_string());
                put("synth_quality_weight", s.quality_weight.to_string());
                put("synth_rating_noise", s.rating_noise.to_string());
                put("synth_genre_skew", s.genre_skew.to_string());
                put("synth_seed", s.seed.to_string());
            }
        }
        put("range_min", self.range.0.to_string());
        put("range_max", self.range.1.to_string());
        put("algorithm", self.algorithms.to_string());
        put("k", self.k.to_string());
        put("factors", self.factors.to_string());
        put("iterations", self.iterations.to_string());
        put("n", self.n.to_string());
        put("test_fraction", self.test_fraction.to_string());
        put("alpha", self.alpha.to_string());
        put("popularity_source", self.popularity.to_string());
        put("seed", self.seed.to_string());
        pairs
    }
}
