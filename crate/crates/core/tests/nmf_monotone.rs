//! Multiplicative updates never increase the masked loss.

use popbias::model::SparseMatrix;
use popbias::recommenders::{NmfConfig, NmfModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, users: usize, items: usize) -> SparseMatrix<f64> {
    let density = rng.random_range(0.05..0.5);
    let mut triplets = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if rng.random_bool(density) {
                triplets.push((u, i, rng.random_range(1.0..=5.0)));
            }
        }
    }
    SparseMatrix::from_triplets(users, items, &triplets)
}

#[test]
fn loss_is_non_increasing_and_factors_non_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..10 {
        let matrix = random_matrix(&mut rng, 50, 40);
        let config = NmfConfig {
            factors: rng.random_range(1..=10),
            iterations: 100,
            seed: case,
        };
        let model = NmfModel::fit(&matrix, config, (1.0, 5.0)).unwrap();
        let history = model.loss_history();
        assert_eq!(history.len(), 100);
        for (step, pair) in history.windows(2).enumerate() {
            assert!(
                pair[1] <= pair[0] * (1.0 + 1e-9),
                "case {case}, step {step}: {} -> {}",
                pair[0],
                pair[1]
            );
        }
        assert!(model.user_factors().iter().all(|&w| w >= 0.0));
        assert!(model.item_factors().iter().all(|&h| h >= 0.0));
        assert_eq!(*history.last().unwrap(), model.masked_loss(&matrix));
    }
}

#[test]
fn f32_loss_is_non_increasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let wide = random_matrix(&mut rng, 30, 20);
    let triplets: Vec<(usize, usize, f32)> = wide
        .entries()
        .map(|r| (r.user.index(), r.item.index(), r.value as f32))
        .collect();
    let matrix = SparseMatrix::from_triplets(30, 20, &triplets);
    let model = NmfModel::fit(
        &matrix,
        NmfConfig {
            factors: 4,
            iterations: 50,
            seed: 1,
        },
        (1.0f32, 5.0),
    )
    .unwrap();
    for pair in model.loss_history().windows(2) {
        assert!(
            pair[1] <= pair[0] * (1.0 + 1e-5),
            "{} -> {}",
            pair[0],
            pair[1]
        );
    }
}
