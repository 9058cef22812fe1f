use std::collections::HashMap;

use super::chart::ChartRef;
use super::series::{Series, Trunc};
use crate::error::{Error, Result};

/// Square or rectangular matrix with series entries. Row and column indices
/// carry a parity (that of the base coordinate they label); entries of an
/// even supermatrix have parity `row + col`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesMatrix {
    chart: ChartRef,
    trunc: Trunc,
    rows: usize,
    cols: usize,
    entries: Vec<Series>,
}

impl SeriesMatrix {
    pub fn zeros(chart: &ChartRef, trunc: Trunc, rows: usize, cols: usize) -> Self {
        Self {
            chart: chart.clone(),
            trunc,
            rows,
            cols,
            entries: vec![Series::zero(chart, trunc); rows * cols],
        }
    }

    pub fn identity(chart: &ChartRef, trunc: Trunc, n: usize) -> Self {
        let mut m = Self::zeros(chart, trunc, n, n);
        for i in 0..n {
            m.set(i, i, Series::one(chart, trunc));
        }
        m
    }

    pub fn from_fn(
        chart: &ChartRef,
        trunc: Trunc,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Series,
    ) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self {
            chart: chart.clone(),
            trunc,
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Series {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, s: Series) {
        self.entries[i * self.cols + j] = s;
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let e = self.get(i, j);
                    if i == j {
                        *e == Series::one(&self.chart, self.trunc)
                    } else {
                        e.is_zero()
                    }
                })
            })
    }

    pub fn mul(&self, other: &SeriesMatrix) -> SeriesMatrix {
        assert_eq!(self.cols, other.rows, "matrix shape mismatch");
        let mut out = SeriesMatrix::zeros(&self.chart, self.trunc, self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Series::zero(&self.chart, self.trunc);
                for k in 0..self.cols {
                    let a = self.get(i, k);
                    let b = other.get(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc = &acc + &(a * b);
                    }
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn add(&self, other: &SeriesMatrix) -> SeriesMatrix {
        let mut out = self.clone();
        for (e, o) in out.entries.iter_mut().zip(&other.entries) {
            *e = &*e + o;
        }
        out
    }

    pub fn neg(&self) -> SeriesMatrix {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e = -&*e;
        }
        out
    }

    fn sub_matrix(&self, rows: &[usize], cols: &[usize]) -> SeriesMatrix {
        SeriesMatrix::from_fn(&self.chart, self.trunc, rows.len(), cols.len(), |i, j| {
            self.get(rows[i], cols[j]).clone()
        })
    }

    /// Determinant by cofactor expansion with memoised minors. Only
    /// meaningful when every entry is even, so that entries commute.
    pub fn det(&self) -> Series {
        assert_eq!(self.rows, self.cols);
        let mut memo = HashMap::new();
        let all: u64 = if self.cols == 64 {
            u64::MAX
        } else {
            (1u64 << self.cols) - 1
        };
        self.minor(0, all, &mut memo)
    }

    fn minor(&self, row: usize, cols: u64, memo: &mut HashMap<(usize, u64), Series>) -> Series {
        if row == self.rows {
            return Series::one(&self.chart, self.trunc);
        }
        if let Some(s) = memo.get(&(row, cols)) {
            return s.clone();
        }
        let mut acc = Series::zero(&self.chart, self.trunc);
        let mut sign_negative = false;
        for j in 0..self.cols {
            if cols & (1 << j) == 0 {
                continue;
            }
            let e = self.get(row, j);
            if !e.is_zero() {
                let rest = self.minor(row + 1, cols & !(1 << j), memo);
                let t = e * &rest;
                acc = if sign_negative { &acc - &t } else { &acc + &t };
            }
            sign_negative = !sign_negative;
        }
        memo.insert((row, cols), acc.clone());
        acc
    }

    /// Inverse of a matrix with commuting entries via adjugate and
    /// determinant; the determinant must be a unit.
    fn inverse_commutative(&self, what: &str) -> Result<SeriesMatrix> {
        let n = self.rows;
        if n == 0 {
            return Ok(self.clone());
        }
        let det = self.det();
        let dinv = det
            .inverse()
            .map_err(|_| Error::NotUnimodular(format!("{what} block has determinant `{det}`")))?;
        let idx: Vec<usize> = (0..n).collect();
        let mut out = SeriesMatrix::zeros(&self.chart, self.trunc, n, n);
        for i in 0..n {
            for j in 0..n {
                // adj(M)_{ij} = (-1)^{i+j} det(M without row j, column i)
                let rows: Vec<usize> = idx.iter().copied().filter(|&r| r != j).collect();
                let cols: Vec<usize> = idx.iter().copied().filter(|&c| c != i).collect();
                let cof = self.sub_matrix(&rows, &cols).det();
                let cof = if (i + j) % 2 == 1 { -&cof } else { cof };
                out.set(i, j, &cof * &dinv);
            }
        }
        Ok(out)
    }

    /// Two-sided inverse of an even supermatrix whose index `i` has parity
    /// `parity[i]`. Splits into even/odd blocks, inverts the even block and
    /// its Schur complement by adjugates, and checks both products.
    pub fn inverse(&self, parity: &[bool]) -> Result<SeriesMatrix> {
        let n = self.rows;
        assert_eq!(n, self.cols);
        assert_eq!(n, parity.len());
        let ev: Vec<usize> = (0..n).filter(|&i| !parity[i]).collect();
        let od: Vec<usize> = (0..n).filter(|&i| parity[i]).collect();
        let a = self.sub_matrix(&ev, &ev);
        let b = self.sub_matrix(&ev, &od);
        let c = self.sub_matrix(&od, &ev);
        let d = self.sub_matrix(&od, &od);
        let ainv = a.inverse_commutative("even")?;
        let s = d.add(&c.mul(&ainv).mul(&b).neg());
        let sinv = s.inverse_commutative("odd Schur")?;
        let ainv_b_sinv = ainv.mul(&b).mul(&sinv);
        let c_ainv = c.mul(&ainv);
        let tl = ainv.add(&ainv_b_sinv.mul(&c_ainv));
        let tr = ainv_b_sinv.neg();
        let bl = sinv.mul(&c_ainv).neg();
        let mut out = SeriesMatrix::zeros(&self.chart, self.trunc, n, n);
        for (i, &r) in ev.iter().enumerate() {
            for (j, &q) in ev.iter().enumerate() {
                out.set(r, q, tl.get(i, j).clone());
            }
            for (j, &q) in od.iter().enumerate() {
                out.set(r, q, tr.get(i, j).clone());
            }
        }
        for (i, &r) in od.iter().enumerate() {
            for (j, &q) in ev.iter().enumerate() {
                out.set(r, q, bl.get(i, j).clone());
            }
            for (j, &q) in od.iter().enumerate() {
                out.set(r, q, sinv.get(i, j).clone());
            }
        }
        if !self.mul(&out).is_identity() || !out.mul(self).is_identity() {
            return Err(Error::Assertion("block inverse is not a two-sided inverse".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::chart::GradedChart;
    use crate::algebra::text::parse_series;

    fn m(chart: &ChartRef, rows: &[&[&str]]) -> SeriesMatrix {
        SeriesMatrix::from_fn(chart, Trunc::DEFAULT, rows.len(), rows[0].len(), |i, j| {
            parse_series(rows[i][j], chart, Trunc::DEFAULT).unwrap()
        })
    }

    #[test]
    fn shear_jacobian_inverts_polynomially() {
        let c = GradedChart::from_degrees(&[("x", 0), ("y", 0)]).unwrap();
        let j = m(&c, &[&["1", "0"], &["2*y", "1"]]);
        let inv = j.inverse(&[false, false]).unwrap();
        assert_eq!(inv, m(&c, &[&["1", "0"], &["-2*y", "1"]]));
    }

    #[test]
    fn mixed_parity_block_inverse() {
        let c = GradedChart::from_degrees(&[("x", 0), ("th", 1)]).unwrap();
        // entry (0,1) has degree 1, entry (1,0) degree -1 (none available, use 0)
        let e = m(&c, &[&["2 + ex", "th"], &["0", "3"]]);
        let inv = e.inverse(&[false, true]).unwrap();
        assert!(e.mul(&inv).is_identity());
    }

    #[test]
    fn non_unit_determinant_rejected() {
        let c = GradedChart::from_degrees(&[("x", 0)]).unwrap();
        let e = m(&c, &[&["x"]]);
        assert!(matches!(e.inverse(&[false]), Err(Error::NotUnimodular(_))));
    }
}
