use crate::error::{NdppError, Result};
use crate::matcore::{self, dot, Mat};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Block-diagonal skew matrix with 2×2 blocks `[[0, λᵢ], [−λᵢ, 0]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockC {
    lambdas: Vec<f64>,
}

impl BlockC {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(NdppError::InvalidArgument("block scales must be positive and finite".into()));
        }
        Ok(BlockC { lambdas })
    }

    /// Even rank `ℓ`.
    pub fn ell(&self) -> usize {
        2 * self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn materialize(&self) -> Mat {
        let mut c = Mat::zeros(self.ell(), self.ell());
        for (i, &l) in self.lambdas.iter().enumerate() {
            c[(2 * i, 2 * i + 1)] = l;
            c[(2 * i + 1, 2 * i)] = -l;
        }
        c
    }
}

fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let p = dot(x, q);
            for (xi, qi) in x.iter_mut().zip(q) {
                *xi -= p * qi;
            }
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Factors a skew-symmetric `a` as `B · C · Bᵀ` with orthonormal `B`
/// (`M × ℓ`) and block-diagonal `C`, `ℓ = rank(a)`.
///
/// The spectrum of the symmetric matrix `aᵀa` comes in equal pairs `λᵢ²`.
/// For each unit eigenvector `u` not yet covered, `w = −a·u/λ` completes the
/// pair, since `a·u = −λ w` and `a·w = λ u`.
pub fn skew_factorize(a: &Mat, tol: f64) -> Result<(Mat, BlockC)> {
    if !a.is_square() {
        return Err(NdppError::Dimension("skew_factorize needs a square matrix".into()));
    }
    let m = a.rows();
    let asym = a.add(&a.transpose()).max_abs();
    if asym > tol {
        return Err(NdppError::NotSkewSymmetric(asym));
    }
    let a = Mat::from_fn(m, m, |i, j| 0.5 * (a[(i, j)] - a[(j, i)]));
    let gram = a.t_matmul(&a);
    let (vals, vecs) = matcore::symmetric_eigen(&gram)?;
    let sigma1 = vals.first().map_or(0.0, |&v| v.max(0.0).sqrt());
    let cutoff = RANK_RTOL * sigma1;
    let rank = vals.iter().filter(|&&v| v.max(0.0).sqrt() > cutoff).count();

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rank);
    let mut lambdas = Vec::with_capacity(rank / 2);
    for j in 0..rank {
        if basis.len() >= rank {
            break;
        }
        let mut u = vecs.col(j);
        project_out(&mut u, &basis);
        let nu = norm(&u);
        if nu < 0.5 {
            // Already spanned by an earlier pair.
            continue;
        }
        u.iter_mut().for_each(|x| *x /= nu);
        let au = a.mul_vec(&u);
        let lambda = norm(&au);
        if lambda <= cutoff {
            continue;
        }
        let mut w: Vec<f64> = au.iter().map(|x| -x / lambda).collect();
        project_out(&mut w, &basis);
        let uw = dot(&w, &u);
        w.iter_mut().zip(&u).for_each(|(wi, ui)| *wi -= uw * ui);
        let nw = norm(&w);
        w.iter_mut().for_each(|x| *x /= nw);
        basis.push(u);
        basis.push(w);
        lambdas.push(lambda);
    }

    // Pairs are visited in descending eigenvalue order; sort anyway so the
    // contract holds under near-ties.
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&x, &y| lambdas[y].total_cmp(&lambdas[x]));
    let ell = 2 * lambdas.len();
    let b = Mat::from_fn(m, ell, |i, j| basis[2 * order[j / 2] + j % 2][i]);
    let lambdas = order.iter().map(|&i| lambdas[i]).collect();
    Ok((b, BlockC::new(lambdas)?))
}
