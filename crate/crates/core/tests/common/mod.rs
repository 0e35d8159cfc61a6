//! Shared test oracles.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense brute-force UserKNN: full similarity enumeration, same tie rules.
pub struct Dense {
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Dense {
    pub fn users(&self) -> usize {
        self.cells.len()
    }

    pub fn items(&self) -> usize {
        self.cells[0].len()
    }

    pub fn mean(&self, u: usize) -> f64 {
        let rated: Vec<f64> = self.cells[u].iter().flatten().copied().collect();
        if rated.is_empty() {
            let all: Vec<f64> = self.cells.iter().flatten().flatten().copied().collect();
            all.iter().sum::<f64>() / all.len() as f64
        } else {
            rated.iter().sum::<f64>() / rated.len() as f64
        }
    }

    pub fn cosine(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return 0.0;
        }
        let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
        for i in 0..self.items() {
            if let (Some(a), Some(b)) = (self.cells[u][i], self.cells[v][i]) {
                dot += a * b;
                nu += a * a;
                nv += b * b;
            }
        }
        let denom = (nu * nv).sqrt();
        if denom > 0.0 {
            (dot / denom).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn predict(&self, u: usize, i: usize, k: usize, range: (f64, f64)) -> f64 {
        let mut candidates: Vec<(f64, usize, f64)> = (0..self.users())
            .filter(|&v| v != u)
            .filter_map(|v| self.cells[v][i].map(|r| (self.cosine(u, v), v, r)))
            .filter(|&(s, _, _)| s > 0.0)
            .collect();
        candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let (mut num, mut den) = (0.0, 0.0);
        for &(s, v, r) in candidates.iter().take(k) {
            num += s * (r - self.mean(v));
            den += s.abs();
        }
        let raw = if den > 0.0 {
            self.mean(u) + num / den
        } else {
            self.mean(u)
        };
        raw.clamp(range.0, range.1)
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Dense, Vec<(usize, usize, f64)>) {
    let (users, items) = (20, 15);
    let density = rng.random_range(0.2..0.7);
    let mut cells = vec![vec![None; items]; users];
    let mut triplets = Vec::new();
    for (u, row) in cells.iter_mut().enumerate() {
        for (i, cell) in row.iter_mut().enumerate() {
            if rng.random_bool(density) {
                // half-star grid so that equal similarities actually occur
                let r = f64::from(rng.random_range(2..=10u8)) / 2.0;
                *cell = Some(r);
                triplets.push((u, i, r));
            }
        }
    }
    (Dense { cells }, triplets)
}
