use std::cmp::Ordering;

use super::chart::GradedChart;

/// Dense exponent vector over the chart's global generator order.
///
/// Odd generators carry exponent 0 or 1. Ordering is by total polynomial
/// degree, then reverse-lexicographic on exponents, so `z1` sorts before
/// `z2` and constants come first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Box<[u16]>);

impl Monomial {
    pub fn one(n: usize) -> Self {
        Self(vec![0; n].into_boxed_slice())
    }

    pub fn generator(n: usize, idx: usize) -> Self {
        let mut e = vec![0; n];
        e[idx] = 1;
        Self(e.into_boxed_slice())
    }

    pub fn from_exponents(exps: Vec<u16>) -> Self {
        Self(exps.into_boxed_slice())
    }

    pub fn exponents(&self) -> &[u16] {
        &self.0
    }

    pub fn exponent(&self, idx: usize) -> u16 {
        self.0[idx]
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|&e| u32::from(e)).sum()
    }

    pub fn zdeg(&self, chart: &GradedChart) -> i32 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &e)| i32::from(e) * chart.generator(i).zdeg)
            .sum()
    }

    pub fn resdeg(&self, chart: &GradedChart) -> u32 {
        let k = chart.n_base();
        self.0[2 * k..3 * k].iter().map(|&e| u32::from(e)).sum()
    }

    pub fn formdeg(&self, chart: &GradedChart) -> u32 {
        let k = chart.n_base();
        self.0[k..2 * k].iter().map(|&e| u32::from(e)).sum()
    }

    pub fn is_odd(&self, chart: &GradedChart) -> bool {
        self.zdeg(chart).rem_euclid(2) == 1
    }

    /// True when no form or fibre generator occurs.
    pub fn is_base_only(&self, chart: &GradedChart) -> bool {
        let k = chart.n_base();
        self.0[k..3 * k].iter().all(|&e| e == 0)
    }

    /// Number of odd generators present (each with exponent 1).
    pub fn odd_count(&self, chart: &GradedChart) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|(i, &e)| e > 0 && chart.is_odd(*i))
            .count()
    }

    /// Product `self · other` in canonical form, with the Koszul sign
    /// collected while sorting. `None` when an odd generator repeats.
    pub fn mul(&self, other: &Monomial, chart: &GradedChart) -> Option<(Monomial, bool)> {
        let mut negative = false;
        for (j, &ej) in other.0.iter().enumerate() {
            if ej == 0 || !chart.is_odd(j) {
                continue;
            }
            if self.0[j] > 0 {
                return None;
            }
            let passed = self.0[j + 1..]
                .iter()
                .enumerate()
                .filter(|(off, &e)| e > 0 && chart.is_odd(j + 1 + off))
                .count();
            if passed % 2 == 1 {
                negative = !negative;
            }
        }
        let exps: Vec<u16> = self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect();
        Some((Monomial::from_exponents(exps), negative))
    }

    /// Left derivative with respect to generator `idx`: returns the
    /// multiplicity, the lowered monomial and whether a sign flip occurred.
    pub fn partial(&self, idx: usize, chart: &GradedChart) -> Option<(u16, Monomial, bool)> {
        let e = self.0[idx];
        if e == 0 {
            return None;
        }
        let negative = if chart.is_odd(idx) {
            let before = self.0[..idx]
                .iter()
                .enumerate()
                .filter(|(i, &x)| x > 0 && chart.is_odd(*i))
                .count();
            before % 2 == 1
        } else {
            false
        };
        let mut exps = self.0.to_vec();
        exps[idx] -= 1;
        Some((e, Monomial::from_exponents(exps), negative))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sign of `m1 · m2` relative to its canonical form: `+1`, `-1`, or `0`
/// when the product vanishes.
pub fn koszul_sign(m1: &Monomial, m2: &Monomial, chart: &GradedChart) -> i8 {
    match m1.mul(m2, chart) {
        None => 0,
        Some((_, true)) => -1,
        Some((_, false)) => 1,
    }
}
