mod common;

use std::f64::consts::PI;

use perforated::ids::{
    curve_from_counts, ensemble_counts, estimate_ids, fit_exponent, geometric_grid, read_curve_csv, write_curve_csv,
    FitKind, Side,
};
use perforated::operators::assemble;
use perforated::spectra::lowest_k;
use perforated::{BoundaryCondition, DisorderModel, EnsembleSpec, ObstacleMask, ObstacleShape};

use common::bx;

fn d1_spec(realizations: usize, l: f64, seed: u64) -> EnsembleSpec {
    let model = DisorderModel::bernoulli(0.5, ObstacleShape::cube(1, 0.5).unwrap()).unwrap();
    EnsembleSpec::new(realizations, seed, bx(1, l), 8, model).unwrap()
}

#[test]
fn ensemble_is_bitwise_reproducible() {
    let e = geometric_grid(0.05, 5.0, 15).unwrap();
    let a = estimate_ids(&d1_spec(12, 16.0, 3), &e).unwrap();
    let b = estimate_ids(&d1_spec(12, 16.0, 3), &e).unwrap();
    assert_eq!(a, b);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    write_curve_csv(&a, &mut x).unwrap();
    write_curve_csv(&b, &mut y).unwrap();
    assert_eq!(x, y);
    assert_eq!(read_curve_csv(x.as_slice()).unwrap(), a);
}

#[test]
fn obstacle_free_limit_matches_empty_box() {
    let model = DisorderModel::bernoulli(1e-15, ObstacleShape::cube(2, 0.5).unwrap()).unwrap();
    let (l, m) = (4.0, 8);
    let spec = EnsembleSpec::new(3, 1, bx(2, l), m, model).unwrap();
    let empty = assemble(&ObstacleMask::empty(bx(2, l), m).unwrap(), BoundaryCondition::DD).unwrap();
    let ground = lowest_k(&empty, 1).unwrap()[0].value;
    let continuum = 2.0 * PI * PI / (l * l);
    assert!(ground <= continuum && ground > 0.999 * continuum);
    let delta = 1e-6;
    let curve = estimate_ids(&spec, &[ground - delta, ground + delta]).unwrap();
    assert_eq!(curve.n_dirichlet[0], 0.0);
    assert!(curve.n_dirichlet[1] >= 1.0 / (l * l));
    assert!(curve.stderr_d.iter().all(|&s| s == 0.0));
}

#[test]
fn desk_run_brackets_and_is_monotone() {
    let e = geometric_grid(0.05, 5.0, 40).unwrap();
    let spec = d1_spec(100, 64.0, 11);
    let counts = ensemble_counts(&spec, &e).unwrap();
    for rc in &counts {
        assert!(rc.dirichlet.iter().zip(&rc.neumann).all(|(d, n)| d <= n));
    }
    let curve = curve_from_counts(&spec, &e, &counts);
    assert!(curve.n_dirichlet.windows(2).all(|w| w[0] <= w[1]));
    assert!(curve.n_neumann.windows(2).all(|w| w[0] <= w[1]));
    assert!(curve.n_dirichlet.iter().chain(&curve.n_neumann).all(|&v| v >= 0.0));

    let lifshitz = fit_exponent(&curve, FitKind::Lifshitz, Side::Dirichlet, None).unwrap();
    assert!((-0.85..=-0.15).contains(&lifshitz.exponent), "{}", lifshitz.exponent);
    let vanhove = fit_exponent(&curve, FitKind::VanHove, Side::Neumann, None).unwrap();
    assert!(vanhove.exponent <= 0.8);
}

#[test]
fn stderr_shrinks_like_inverse_root_of_realizations() {
    let e = geometric_grid(0.5, 20.0, 12).unwrap();
    let small = estimate_ids(&d1_spec(100, 16.0, 21), &e).unwrap();
    let large = estimate_ids(&d1_spec(200, 16.0, 21), &e).unwrap();
    let ratios: Vec<f64> = small
        .stderr_n
        .iter()
        .zip(&large.stderr_n)
        .chain(small.stderr_d.iter().zip(&large.stderr_d))
        .filter(|(s, _)| **s > 0.0)
        .map(|(s, l)| l / s)
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((0.6..=0.82).contains(&mean), "mean ratio {mean}");
}

#[test]
fn finite_volume_means_move_toward_the_ids() {
    let e = [0.3, 1.0, 3.0];
    let curves: Vec<_> = [16.0, 32.0, 64.0].iter().map(|&l| estimate_ids(&d1_spec(60, l, 5), &e).unwrap()).collect();
    for w in curves.windows(2) {
        for k in 0..e.len() {
            let sd = (w[0].stderr_d[k].powi(2) + w[1].stderr_d[k].powi(2)).sqrt();
            let sn = (w[0].stderr_n[k].powi(2) + w[1].stderr_n[k].powi(2)).sqrt();
            assert!(w[1].n_dirichlet[k] >= w[0].n_dirichlet[k] - 2.0 * sd, "Dirichlet at E = {}", e[k]);
            assert!(w[1].n_neumann[k] <= w[0].n_neumann[k] + 2.0 * sn, "Neumann at E = {}", e[k]);
        }
    }
}

/// Side (in cells) of the largest empty square block of cells.
fn largest_empty_block(mask: &ObstacleMask) -> usize {
    let g = mask.grid();
    let n = mask.cells_per_side();
    let mut best = 0;
    let mut dp = vec![0usize; n * n];
    for y in 0..n {
        for x in 0..n {
            let c = g.index(&[x, y]);
            if g.is_occupied(c) {
                continue;
            }
            let v = if x == 0 || y == 0 {
                1
            } else {
                1 + dp[(y - 1) * n + x].min(dp[y * n + x - 1]).min(dp[(y - 1) * n + x - 1])
            };
            dp[y * n + x] = v;
            best = best.max(v);
        }
    }
    best
}

#[test]
fn ground_state_bounded_by_largest_empty_block() {
    let model = DisorderModel::bernoulli(0.5, ObstacleShape::cube(2, 0.5).unwrap()).unwrap();
    for seed in 0..6 {
        let mask = perforated::geometry::sample_mask(&model, &bx(2, 8.0), 4, seed).unwrap();
        let k = largest_empty_block(&mask) as f64 * mask.h();
        let op = assemble(&mask, BoundaryCondition::DD).unwrap();
        let ground = lowest_k(&op, 1).unwrap()[0].value;
        assert!(ground <= 2.0 * PI * PI / (k * k) + 1e-9, "seed {seed}: {ground} vs block {k}");
    }
}

#[test]
fn ground_state_decreases_as_the_box_grows() {
    // Boxes are nested and realizations are enlargement invariant, so the
    // Dirichlet ground state can only go down, realization by realization.
    let model = DisorderModel::bernoulli(0.5, ObstacleShape::cube(1, 0.5).unwrap()).unwrap();
    for seed in 0..5 {
        let grounds: Vec<f64> = [4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&l| {
                let mask = perforated::geometry::sample_mask(&model, &bx(1, l), 8, seed).unwrap();
                match assemble(&mask, BoundaryCondition::DD) {
                    Ok(op) => lowest_k(&op, 1).unwrap()[0].value,
                    Err(_) => f64::INFINITY,
                }
            })
            .collect();
        assert!(grounds.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{grounds:?}");
        assert!(grounds[3] < grounds[0] || grounds[0].is_infinite());
    }
}
