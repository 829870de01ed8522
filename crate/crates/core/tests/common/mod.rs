#![allow(dead_code)]

use fkl_core::rng::{seeded_rng, Rng};
use fkl_core::{BanditInstance, Noise, Policy, Table};
use rand::Rng as _;

pub fn rng(seed: u64) -> Rng {
    seeded_rng(seed)
}

pub fn simplex_point(rng: &mut Rng, k: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| floor + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn random_instance(rng: &mut Rng, s: usize, a: usize, noise: Noise) -> BanditInstance {
    let rewards = Table::from_fn(s, a, |_, _| rng.random::<f64>());
    let rho = simplex_point(rng, s, 0.1);
    let rows: Vec<Vec<f64>> = (0..s).map(|_| simplex_point(rng, a, 0.1)).collect();
    BanditInstance::new(rewards, rho, Table::from_rows(rows).unwrap(), noise).unwrap()
}

pub fn random_policy(rng: &mut Rng, s: usize, a: usize) -> Policy {
    let rows: Vec<Vec<f64>> = (0..s).map(|_| simplex_point(rng, a, 0.01)).collect();
    Policy::from_rows(rows).unwrap()
}

pub fn log_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp()
}
