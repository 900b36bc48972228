#![allow(dead_code)]

use oqw::model::{build_cycle3, build_two_site, coins, random_density, OqwModel};
use oqw::tensor::{ComplexMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;

pub fn two_site() -> OqwModel {
    build_two_site()
}

pub fn three_cycle() -> OqwModel {
    let (l, r) = coins::cycle_example();
    build_cycle3(&l, &r).unwrap()
}

pub fn densities(seed: u64, count: usize, n: usize) -> Vec<ComplexMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_density(&mut rng, n)).collect()
}

pub fn real_rows(rows: &[&[f64]]) -> ComplexMatrix {
    ComplexMatrix::from_real_rows(rows).unwrap()
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// First-visit mass at `r` by walking every site sequence `j → … → i` that
/// avoids `i` in between and summing `Tr(C ρ C*)` of the effect products.
pub fn brute_force_first_visit(model: &OqwModel, i: usize, j: usize, rho: &ComplexMatrix, r: usize) -> f64 {
    fn walk(model: &OqwModel, i: usize, site: usize, x: &ComplexMatrix, left: usize, out: &mut f64) {
        for (to, b) in model.effects_from(site) {
            let next = &(b * x) * &b.adjoint();
            if left == 1 {
                if to == i {
                    *out += next.trace().re;
                }
            } else if to != i {
                walk(model, i, to, &next, left - 1, out);
            }
        }
    }
    if r == 0 {
        return if i == j { 1.0 } else { 0.0 };
    }
    if i == j {
        return 0.0;
    }
    let mut out = 0.0;
    walk(model, i, j, rho, r, &mut out);
    out
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for t in col..n {
                a[row][t] -= f * a[col][t];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|t| a[row][t] * x[t]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Mean time to reach `target` from every site, for a column-stochastic `p`
/// (`p[l][j]` is the probability of `j → l`), from `m_j = 1 + Σ_{l≠target} p[l][j] m_l`.
pub fn classical_hitting_times(p: &[Vec<f64>], target: usize) -> Vec<f64> {
    let k = p.len();
    let others: Vec<usize> = (0..k).filter(|&s| s != target).collect();
    let a: Vec<Vec<f64>> = others
        .iter()
        .map(|&j| {
            others
                .iter()
                .map(|&l| if l == j { 1.0 - p[l][j] } else { -p[l][j] })
                .collect()
        })
        .collect();
    let m = solve(a, vec![1.0; others.len()]);
    let mut out = vec![0.0; k];
    for (slot, v) in others.iter().zip(m) {
        out[*slot] = v;
    }
    out
}

/// Stationary law of a column-stochastic `p`.
pub fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let k = p.len();
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| p[i][j] - if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut b = vec![0.0; k];
    a[k - 1] = vec![1.0; k];
    b[k - 1] = 1.0;
    solve(a, b)
}

/// Classical fundamental matrix `Z = (I − P + Π)⁻¹` in the row-stochastic
/// convention `P[j][l] = p[l][j]`, so that `π_l E_j T_l = Z_ll − Z_jl`.
pub fn classical_fundamental(p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = p.len();
    let pi = stationary(p);
    let m: Vec<Vec<f64>> = (0..k)
        .map(|j| (0..k).map(|l| if j == l { 1.0 } else { 0.0 } - p[l][j] + pi[l]).collect())
        .collect();
    // columns of the inverse
    let mut z = vec![vec![0.0; k]; k];
    for col in 0..k {
        let e: Vec<f64> = (0..k).map(|r| if r == col { 1.0 } else { 0.0 }).collect();
        let x = solve(m.clone(), e);
        for row in 0..k {
            z[row][col] = x[row];
        }
    }
    z
}

/// Column-stochastic matrix with strictly positive entries.
pub fn random_positive_chain<R: Rng>(rng: &mut R, k: usize) -> Vec<Vec<f64>> {
    let raw: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| 0.05 + rng.random::<f64>()).collect()).collect();
    let sums: Vec<f64> = (0..k).map(|j| (0..k).map(|i| raw[i][j]).sum()).collect();
    (0..k).map(|i| (0..k).map(|j| raw[i][j] / sums[j]).collect()).collect()
}

/// Convex mix of the identity, the cyclic shift and random permutations.
pub fn random_doubly_stochastic<R: Rng>(rng: &mut R, k: usize) -> Vec<Vec<f64>> {
    let mut perms: Vec<Vec<usize>> = vec![(0..k).collect(), (0..k).map(|t| (t + 1) % k).collect()];
    for _ in 0..3 {
        let mut p: Vec<usize> = (0..k).collect();
        for t in (1..k).rev() {
            p.swap(t, rng.random_range(0..=t));
        }
        perms.push(p);
    }
    let w: Vec<f64> = perms.iter().map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    let mut out = vec![vec![0.0; k]; k];
    for (perm, wt) in perms.iter().zip(&w) {
        for (j, &i) in perm.iter().enumerate() {
            out[i][j] += wt / total;
        }
    }
    out
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Haar-like unitary from the QR factor of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = gaussian_matrix(rng, n).into_dmatrix();
    ComplexMatrix::from_dmatrix(g.qr().q()).unwrap()
}

/// `B_ij = √p_ij U_ij` with `p` doubly stochastic and positive and every `U_ij`
/// unitary, so both `Σ_i B_ij*B_ij` and `Σ_j B_ij B_ij*` are the identity.
pub fn random_unital_walk<R: Rng>(rng: &mut R, k: usize, n: usize) -> OqwModel {
    let p = random_doubly_stochastic(rng, k);
    let mut model = OqwModel::new(k, n).unwrap();
    for i in 0..k {
        for j in 0..k {
            if p[i][j] > 0.0 {
                model.set_effect(i, j, random_unitary(rng, n).scale_real(p[i][j].sqrt())).unwrap();
            }
        }
    }
    model
}

/// Trace-preserving walk with dense random effects: `B_ij = G_ij S_j^{-1/2}`
/// where `S_j = Σ_i G_ij* G_ij`.
pub fn random_walk<R: Rng>(rng: &mut R, k: usize, n: usize) -> OqwModel {
    let mut model = OqwModel::new(k, n).unwrap();
    for j in 0..k {
        let g: Vec<ComplexMatrix> = (0..k).map(|_| gaussian_matrix(rng, n)).collect();
        let mut s = ComplexMatrix::zeros(n);
        for gi in &g {
            s = &s + &(&gi.adjoint() * gi);
        }
        let eig = s.into_dmatrix().symmetric_eigen();
        let inv_sqrt = eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0));
        let v = eig.eigenvectors;
        let root = &v * nalgebra::DMatrix::from_diagonal(&inv_sqrt) * v.adjoint();
        let root = ComplexMatrix::from_dmatrix(root).unwrap();
        for (i, gi) in g.iter().enumerate() {
            model.set_effect(i, j, gi * &root).unwrap();
        }
    }
    model
}
