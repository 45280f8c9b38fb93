use bumplab_core::grid::{DyadicCube, Lattice, WeightGrid};
use bumplab_core::sparse::{norm_oracle, testing_constant, OracleConfig, SparseCollection};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn family(rng: &mut ChaCha8Rng, l: u32) -> SparseCollection {
    let lattice = Lattice::new(1, l).unwrap();
    let mut c = SparseCollection::new(lattice, &[DyadicCube::ROOT], 0.5).unwrap();
    for _ in 0..60 {
        let level = rng.random_range(1..=l);
        let q = DyadicCube::new(level, rng.random_range(0..1u64 << level));
        if let Some(next) = c.with_cube(q).unwrap() {
            c = next;
        }
    }
    c
}

fn weight(rng: &mut ChaCha8Rng, l: u32) -> WeightGrid {
    let n = 1usize << l;
    WeightGrid::new(1, l, (0..n).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect()).unwrap()
}

/// Largest singular value of `M = diag(w h)^{1/2} K diag(σ h)^{1/2}` where
/// `K_xy = Σ_{Q ∋ x, y} 1/|Q|`.
fn dense_norm(c: &SparseCollection, s: &WeightGrid, w: &WeightGrid) -> f64 {
    let lat = c.lattice();
    let n = lat.n_cells();
    let h = lat.cell_volume();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for q in c.cubes() {
        let r = lat.cell_range(q);
        let inv = 1.0 / q.volume(lat.dim);
        for x in r.clone() {
            for y in r.clone() {
                m[(x, y)] += inv;
            }
        }
    }
    for x in 0..n {
        for y in 0..n {
            m[(x, y)] *= (w.cells()[x] * h).sqrt() * (s.cells()[y] * h).sqrt();
        }
    }
    let mtm = m.transpose() * &m;
    let eig = nalgebra::SymmetricEigen::new(mtm);
    eig.eigenvalues.iter().cloned().fold(0.0, f64::max).sqrt()
}

#[test]
fn p2_oracle_matches_dense_spectral_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for l in [4u32, 6] {
        for _ in 0..20 {
            let c = family(&mut rng, l);
            let s = weight(&mut rng, l);
            let w = weight(&mut rng, l);
            let est = norm_oracle(&c, &s, &w, 2.0, &OracleConfig::default(), None).unwrap();
            let exact = dense_norm(&c, &s, &w);
            assert!(est.value <= exact * (1.0 + 1e-9), "oracle above the true norm");
            assert!((est.value - exact).abs() <= 1e-6 * exact, "L={l}: {} vs {exact}", est.value);
            let t = testing_constant(&c, &s, &w, 2.0).unwrap().value;
            assert!(est.value >= t * (1.0 - 1e-12));
        }
    }
}
