//! Dense primal simplex with Bland's rule for `max 1ᵀy s.t. A y ≤ 1, y ≥ 0`, `A > 0`.
//!
//! With strictly positive `A` the slack basis is feasible and the polytope is bounded, so the
//! only failure mode is exceeding the pivot budget.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const PIVOT_EPS: f64 = 1e-12;

/// Optimal primal `y` and dual `x` (`Aᵀx ≥ 1`), both with objective `Σy = Σx`.
pub(crate) struct PackingSolution {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

pub(crate) fn solve_packing(a: &Matrix) -> Result<PackingSolution> {
    let (m, n) = (a.rows(), a.cols());
    let width = n + m + 1;
    let mut tab = vec![0.0; m * width];
    for i in 0..m {
        let row = &mut tab[i * width..(i + 1) * width];
        row[..n].copy_from_slice(a.row(i));
        row[n + i] = 1.0;
        row[width - 1] = 1.0;
    }
    // reduced costs c_j − z_j
    let mut obj = vec![0.0; n + m];
    obj[..n].iter_mut().for_each(|c| *c = 1.0);
    let mut basis: Vec<usize> = (n..n + m).collect();

    let budget = 50 * (m + n + 1) * (m + n + 1);
    for _ in 0..budget {
        let Some(enter) = obj.iter().position(|&c| c > PIVOT_EPS) else {
            let mut primal = vec![0.0; n];
            for (i, &b) in basis.iter().enumerate() {
                if b < n {
                    primal[b] = tab[i * width + width - 1];
                }
            }
            let dual = (0..m).map(|i| -obj[n + i]).collect();
            return Ok(PackingSolution { primal, dual });
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = tab[i * width + enter];
            if coef <= PIVOT_EPS {
                continue;
            }
            let ratio = tab[i * width + width - 1] / coef;
            leave = match leave {
                None => Some((i, ratio)),
                Some((j, best)) => {
                    if ratio < best || (ratio == best && basis[i] < basis[j]) {
                        Some((i, ratio))
                    } else {
                        Some((j, best))
                    }
                }
            };
        }
        let Some((pivot_row, _)) = leave else {
            break;
        };
        pivot(&mut tab, &mut obj, width, pivot_row, enter);
        basis[pivot_row] = enter;
    }
    Err(Error::LpFailure {
        pivots: budget,
        matrix: a.clone(),
    })
}

fn pivot(tab: &mut [f64], obj: &mut [f64], width: usize, r: usize, c: usize) {
    let p = tab[r * width + c];
    for v in &mut tab[r * width..(r + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = tab[r * width..(r + 1) * width].to_vec();
    let m = tab.len() / width;
    for i in (0..m).filter(|&i| i != r) {
        let f = tab[i * width + c];
        if f == 0.0 {
            continue;
        }
        for (v, pr) in tab[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
            *v -= f * pr;
        }
        tab[i * width + c] = 0.0;
    }
    let f = obj[c];
    for (o, pr) in obj.iter_mut().zip(&pivot_row) {
        *o -= f * pr;
    }
    obj[c] = 0.0;
}
