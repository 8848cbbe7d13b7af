//! Small dense two-phase simplex over exact rationals.
//!
//! Problems are in standard form: maximize `c.x` subject to `A x = b`,
//! `x >= 0`. Bland's rule is used throughout, so the method terminates on
//! degenerate problems; it is intended for the few-dozen-variable systems in
//! this crate, not for anything large.

use num::{Signed, Zero};

use crate::rational::{int, Exact};

#[derive(Debug, Clone)]
pub struct Problem {
    pub a: Vec<Vec<Exact>>,
    pub b: Vec<Exact>,
    pub c: Vec<Exact>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal {
        x: Vec<Exact>,
        value: Exact,
    },
    /// `y` with `y^T A >= 0` and `y^T b < 0`.
    Infeasible {
        farkas: Vec<Exact>,
    },
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<Exact>>,
    /// Objective row: `z_j` reduced costs (entering when negative), last
    /// entry is the current objective value.
    z: Vec<Exact>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &factor * pv;
                }
            }
        }
        if !self.z[col].is_zero() {
            let factor = self.z[col].clone();
            for (v, pv) in self.z.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &factor * pv;
                }
            }
        }
        self.basis[r] = col;
    }

    /// Runs simplex iterations over columns `0..allowed`. Returns false if
    /// unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        loop {
            let Some(col) = (0..allowed).find(|&j| self.z[j].is_negative()) else {
                return true;
            };
            let rhs = self.width - 1;
            let mut best: Option<(usize, Exact)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if !row[col].is_positive() {
                    continue;
                }
                let ratio = &row[rhs] / &row[col];
                let better = match &best {
                    None => true,
                    Some((br, bv)) => {
                        ratio < *bv || (ratio == *bv && self.basis[r] < self.basis[*br])
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(r, col),
            }
        }
    }

    fn set_objective(&mut self, costs: &[Exact]) {
        // z_j = c_B^T B^-1 A_j - c_j
        let mut z: Vec<Exact> = vec![Exact::zero(); self.width];
        for (j, zj) in z.iter_mut().enumerate() {
            if j < costs.len() {
                *zj = -costs[j].clone();
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let cb = costs
                .get(self.basis[r])
                .cloned()
                .unwrap_or_else(Exact::zero);
            if cb.is_zero() {
                continue;
            }
            for (zj, v) in z.iter_mut().zip(row) {
                *zj += &cb * v;
            }
        }
        self.z = z;
    }
}

pub fn solve(p: &Problem) -> Outcome {
    let m = p.b.len();
    let n = p.c.len();
    assert!(
        p.a.iter().all(|row| row.len() == n),
        "ragged constraint matrix"
    );
    assert_eq!(p.a.len(), m, "row count mismatch");

    // Columns: n originals, m artificials, rhs.
    let width = n + m + 1;
    let mut signs = Vec::with_capacity(m);
    let mut rows = Vec::with_capacity(m);
    for r in 0..m {
        let flip = p.b[r].is_negative();
        signs.push(if flip { int(-1) } else { int(1) });
        let mut row = vec![Exact::zero(); width];
        for (dst, src) in row.iter_mut().zip(&p.a[r]) {
            *dst = if flip { -src.clone() } else { src.clone() };
        }
        row[n + r] = int(1);
        row[width - 1] = if flip {
            -p.b[r].clone()
        } else {
            p.b[r].clone()
        };
        rows.push(row);
    }
    let mut t = Tableau {
        rows,
        z: Vec::new(),
        basis: (n..n + m).collect(),
        width,
    };

    // Phase 1: maximize -sum(artificials).
    let mut phase1 = vec![Exact::zero(); n + m];
    for c in phase1.iter_mut().skip(n) {
        *c = int(-1);
    }
    t.set_objective(&phase1);
    let bounded = t.optimize(n + m);
    debug_assert!(bounded, "phase 1 is always bounded");
    if t.z[width - 1].is_negative() {
        // y_r = z_{n+r} - c_{n+r} offsets: z_{n+r} = y_r + 1.
        let farkas = (0..m).map(|r| (&t.z[n + r] - int(1)) * &signs[r]).collect();
        return Outcome::Infeasible { farkas };
    }

    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= n {
            match (0..n).find(|&j| !t.rows[r][j].is_zero()) {
                Some(col) => t.pivot(r, col),
                None => {
                    t.rows.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }

    t.set_objective(&p.c);
    if !t.optimize(n) {
        return Outcome::Unbounded;
    }
    let mut x = vec![Exact::zero(); n];
    for (r, &bcol) in t.basis.iter().enumerate() {
        if bcol < n {
            x[bcol] = t.rows[r][width - 1].clone();
        }
    }
    let value = x
        .iter()
        .zip(&p.c)
        .fold(Exact::zero(), |acc, (xi, ci)| acc + xi * ci);
    Outcome::Optimal { x, value }
}

/// Feasibility of `A x = b, x >= 0`: a point, or a Farkas certificate.
pub fn feasible(a: &[Vec<Exact>], b: &[Exact]) -> Result<Vec<Exact>, Vec<Exact>> {
    let n = a.first().map_or(0, |r| r.len());
    let p = Problem {
        a: a.to_vec(),
        b: b.to_vec(),
        c: vec![Exact::zero(); n],
    };
    match solve(&p) {
        Outcome::Optimal { x, .. } => Ok(x),
        Outcome::Infeasible { farkas } => Err(farkas),
        Outcome::Unbounded => unreachable!("zero objective cannot be unbounded"),
    }
}

/// Checks a Farkas certificate: `y^T A >= 0` componentwise and `y^T b < 0`.
pub fn check_farkas(a: &[Vec<Exact>], b: &[Exact], y: &[Exact]) -> bool {
    if y.len() != a.len() || y.len() != b.len() {
        return false;
    }
    let n = a.first().map_or(0, |r| r.len());
    let cols_ok = (0..n).all(|j| {
        let s = a
            .iter()
            .zip(y)
            .fold(Exact::zero(), |acc, (row, yr)| acc + &row[j] * yr);
        !s.is_negative()
    });
    let yb = b
        .iter()
        .zip(y)
        .fold(Exact::zero(), |acc, (bi, yi)| acc + bi * yi);
    cols_ok && yb.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn q(v: &[i64]) -> Vec<Exact> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn small_max_problem() {
        // max 3x + 2y s.t. x + y + s1 = 4, x + 3y + s2 = 6
        let p = Problem {
            a: vec![q(&[1, 1, 1, 0]), q(&[1, 3, 0, 1])],
            b: q(&[4, 6]),
            c: q(&[3, 2, 0, 0]),
        };
        match solve(&p) {
            Outcome::Optimal { x, value } => {
                assert_eq!(value, int(12));
                assert_eq!(x[0], int(4));
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn fractional_optimum() {
        // max x + y s.t. 2x + y + s1 = 3, x + 2y + s2 = 3 -> x = y = 1
        // then with 3x + y <= 2: x = 1/3? use a 3-row instance.
        let p = Problem {
            a: vec![q(&[3, 1, 1, 0]), q(&[1, 3, 0, 1])],
            b: q(&[2, 2]),
            c: q(&[1, 1, 0, 0]),
        };
        match solve(&p) {
            Outcome::Optimal { x, value } => {
                assert_eq!(x[0], ratio(1, 2));
                assert_eq!(x[1], ratio(1, 2));
                assert_eq!(value, int(1));
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn infeasible_has_certificate() {
        // x + y = 1 and x + y = 2
        let a = vec![q(&[1, 1]), q(&[1, 1])];
        let b = q(&[1, 2]);
        let y = feasible(&a, &b).unwrap_err();
        assert!(check_farkas(&a, &b, &y));
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // -x = -2, 2x = 4 (redundant), x - y = 1
        let a = vec![q(&[-1, 0]), q(&[2, 0]), q(&[1, -1])];
        let b = q(&[-2, 4, 1]);
        let x = feasible(&a, &b).unwrap();
        assert_eq!(x, q(&[2, 1]));
    }

    #[test]
    fn unbounded_detected() {
        let p = Problem {
            a: vec![q(&[1, -1])],
            b: q(&[0]),
            c: q(&[1, 0]),
        };
        assert_eq!(solve(&p), Outcome::Unbounded);
    }

    #[test]
    fn certificate_checker_rejects_bad_certificates() {
        let a = vec![q(&[1, 1])];
        let b = q(&[1]);
        assert!(!check_farkas(&a, &b, &q(&[1])));
        assert!(!check_farkas(&a, &b, &q(&[-1])));
        assert!(!check_farkas(&a, &b, &q(&[])));
    }
}
