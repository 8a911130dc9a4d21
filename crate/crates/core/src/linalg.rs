//! Incremental Gauss-Jordan elimination over [`Scalar`].

use crate::scalar::{Equality, Scalar};

struct BasisRow {
    pivot: usize,
    coeffs: Vec<Scalar>,
    rhs: Scalar,
}

/// Keeps a reduced row echelon basis of the equations pushed so far.
pub struct RowReducer {
    unknowns: usize,
    rows: Vec<BasisRow>,
    equality: Equality,
}

impl RowReducer {
    pub fn new(unknowns: usize, equality: Equality) -> Self {
        RowReducer { unknowns, rows: Vec::new(), equality }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rows.len() == self.unknowns
    }

    /// Adds `coeffs · x = rhs`. Returns whether the rank increased.
    pub fn push(&mut self, mut coeffs: Vec<Scalar>, mut rhs: Scalar) -> bool {
        assert_eq!(coeffs.len(), self.unknowns, "coefficient vector length");
        for row in &self.rows {
            let factor = coeffs[row.pivot].clone();
            if factor.is_zero() {
                continue;
            }
            for (c, r) in coeffs.iter_mut().zip(&row.coeffs) {
                if !r.is_zero() {
                    *c = &*c - &(&factor * r);
                }
            }
            rhs = &rhs - &(&factor * &row.rhs);
        }
        let pivot = match self.equality {
            Equality::Exact => coeffs.iter().position(|c| !c.is_zero()),
            Equality::Tolerant { .. } => coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !self.equality.is_zero(c))
                .max_by(|a, b| a.1.abs().to_f64().total_cmp(&b.1.abs().to_f64()))
                .map(|(i, _)| i),
        };
        let Some(pivot) = pivot else { return false };
        let inv = Scalar::from_int(1) / &coeffs[pivot];
        for c in coeffs.iter_mut() {
            *c = &*c * &inv;
        }
        rhs = &rhs * &inv;
        coeffs[pivot] = Scalar::from_int(1);
        for row in &mut self.rows {
            let factor = row.coeffs[pivot].clone();
            if factor.is_zero() {
                continue;
            }
            for (c, r) in row.coeffs.iter_mut().zip(&coeffs) {
                if !r.is_zero() {
                    *c = &*c - &(&factor * r);
                }
            }
            row.rhs = &row.rhs - &(&factor * &rhs);
        }
        self.rows.push(BasisRow { pivot, coeffs, rhs });
        true
    }

    /// The unique solution, once the system has full column rank.
    pub fn solve(&self) -> Option<Vec<Scalar>> {
        if !self.is_full_rank() {
            return None;
        }
        let mut x = vec![Scalar::zero(); self.unknowns];
        for row in &self.rows {
            x[row.pivot] = row.rhs.clone();
        }
        Some(x)
    }
}
