//! Random valid inputs for property tests: formal exponential maps,
//! torsion-free connections and sample elements. All generators take an
//! explicit RNG so runs are reproducible from a seed.

use std::collections::BTreeMap;

use rand::Rng;

use crate::algebra::{rat, ChartRef, Monomial, Series, SeriesMatrix, Trunc};
use crate::connection::Connection;
use crate::error::Result;
use crate::fexp::FormalExpMap;

/// Shape of random polynomials.
#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    /// Maximal total exponent of even base coordinates in a coefficient.
    pub max_base_degree: u32,
    /// Coefficients are drawn from `−bound..=bound` without zero.
    pub bound: i64,
    /// Probability that an admissible monomial appears.
    pub density: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            max_base_degree: 2,
            bound: 3,
            density: 0.4,
        }
    }
}

/// All monomials in `gens` (global indices) of ℤ-degree `zdeg` whose even
/// generators have total exponent at most `max_even`. Odd generators
/// appear at most once.
pub fn monomials_of_degree(chart: &ChartRef, gens: &[usize], max_even: u32, zdeg: i32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u16; chart.len()];
    fn go(
        chart: &ChartRef,
        gens: &[usize],
        pos: usize,
        even_left: u32,
        exps: &mut Vec<u16>,
        zdeg: i32,
        out: &mut Vec<Monomial>,
    ) {
        if pos == gens.len() {
            let m = Monomial::from_exponents(exps.clone());
            if m.zdeg(chart) == zdeg {
                out.push(m);
            }
            return;
        }
        let idx = gens[pos];
        let max = if chart.is_odd(idx) { 1 } else { even_left };
        for e in 0..=max {
            exps[idx] = e as u16;
            let left = if chart.is_odd(idx) { even_left } else { even_left - e };
            go(chart, gens, pos + 1, left, exps, zdeg, out);
        }
        exps[idx] = 0;
    }
    go(chart, gens, 0, max_even, &mut exps, zdeg, &mut out);
    out
}

fn coefficient<R: Rng>(rng: &mut R, bound: i64) -> i64 {
    loop {
        let c = rng.gen_range(-bound..=bound);
        if c != 0 {
            return c;
        }
    }
}

/// Random sum over `monomials` with density and coefficient bound from
/// `spec`.
pub fn random_combination<R: Rng>(
    rng: &mut R,
    chart: &ChartRef,
    trunc: Trunc,
    monomials: &[Monomial],
    spec: &RandomSpec,
) -> Series {
    let mut terms = Vec::new();
    for m in monomials {
        if rng.gen_bool(spec.density) {
            terms.push((m.clone(), rat(coefficient(rng, spec.bound))));
        }
    }
    Series::from_terms(chart, trunc, terms).expect("monomials of the chart")
}

fn base_gens(chart: &ChartRef) -> Vec<usize> {
    (0..chart.n_base()).map(|a| chart.base(a)).collect()
}

/// Random function of the base coordinates of the given degree.
pub fn random_base_series<R: Rng>(rng: &mut R, chart: &ChartRef, trunc: Trunc, zdeg: i32, spec: &RandomSpec) -> Series {
    let monos = monomials_of_degree(chart, &base_gens(chart), spec.max_base_degree, zdeg);
    random_combination(rng, chart, trunc, &monos, spec)
}

/// Random valid formal exponential map with polynomial `e_2..e_top`.
///
/// With `proper` the linear part is `ε^a`; otherwise `e₁` is a random
/// unit lower-triangular matrix (in base order) times a diagonal of
/// nonzero constants, which is unimodular by construction.
pub fn random_fexp<R: Rng>(
    rng: &mut R,
    chart: &ChartRef,
    trunc: Trunc,
    top: u32,
    proper: bool,
    spec: &RandomSpec,
) -> Result<FormalExpMap> {
    let k = chart.n_base();
    let e1 = if proper {
        SeriesMatrix::identity(chart, trunc, k)
    } else {
        SeriesMatrix::from_fn(chart, trunc, k, k, |b, a| {
            let deg = chart.base_degree(a) - chart.base_degree(b);
            match b.cmp(&a) {
                std::cmp::Ordering::Equal => Series::constant(chart, trunc, rat(coefficient(rng, 2))),
                std::cmp::Ordering::Greater => random_base_series(rng, chart, trunc, deg, spec),
                std::cmp::Ordering::Less => Series::zero(chart, trunc),
            }
        })
    };
    let fibres: Vec<usize> = (0..k).map(|a| chart.fiber(a)).collect();
    let mut pullbacks = Vec::with_capacity(k);
    for a in 0..k {
        let mut p = Series::generator(chart, trunc, chart.base(a));
        for b in 0..k {
            p = &p + &(&Series::generator(chart, trunc, chart.fiber(b)) * e1.get(b, a));
        }
        for n in 2..=top.min(trunc.res) {
            // ε-monomials of resolution degree n times base coefficients
            for em in all_fibre_monomials(chart, &fibres, n) {
                let deg = chart.base_degree(a) - em.zdeg(chart);
                let coeff = random_base_series(rng, chart, trunc, deg, spec);
                p = &p + &(&Series::monomial(chart, trunc, em, rat(1)) * &coeff);
            }
        }
        pullbacks.push(p);
    }
    let f = FormalExpMap::new(chart, trunc, pullbacks)?;
    crate::fexp::require_valid(&f)?;
    Ok(f)
}

/// Every monomial in the fibre generators of total exponent `n`.
fn all_fibre_monomials(chart: &ChartRef, fibres: &[usize], n: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u16; chart.len()];
    fn go(chart: &ChartRef, fibres: &[usize], pos: usize, left: u32, exps: &mut Vec<u16>, out: &mut Vec<Monomial>) {
        if pos == fibres.len() {
            if left == 0 {
                out.push(Monomial::from_exponents(exps.clone()));
            }
            return;
        }
        let idx = fibres[pos];
        let max = if chart.is_odd(idx) { left.min(1) } else { left };
        for e in 0..=max {
            exps[idx] = e as u16;
            go(chart, fibres, pos + 1, left - e, exps, out);
        }
        exps[idx] = 0;
    }
    go(chart, fibres, 0, n, &mut exps, &mut out);
    out
}

/// Random torsion-free connection: `A^a_{bc}` for `b ≤ c` drawn freely,
/// the rest fixed by graded symmetry.
pub fn random_connection<R: Rng>(rng: &mut R, chart: &ChartRef, trunc: Trunc, spec: &RandomSpec) -> Result<Connection> {
    let k = chart.n_base();
    let mut symbols = BTreeMap::new();
    for a in 0..k {
        for b in 0..k {
            for c in b..k {
                let (ob, oc) = (chart.is_odd(chart.base(b)), chart.is_odd(chart.base(c)));
                if b == c && ob {
                    continue;
                }
                let deg = chart.base_degree(a) - chart.base_degree(b) - chart.base_degree(c);
                let s = random_base_series(rng, chart, trunc, deg, spec);
                if s.is_zero() {
                    continue;
                }
                if b != c {
                    let swapped = if ob && oc { -&s } else { s.clone() };
                    symbols.insert((a, c, b), swapped);
                }
                symbols.insert((a, b, c), s);
            }
        }
    }
    Connection::new(chart, trunc, symbols)
}

/// Random monomial of `deg_HT` weight `w` over the whole chart (no
/// parameters), with coefficient in `±1..=bound`. Returns zero when no
/// monomial of that weight fits the truncation.
pub fn random_ht_monomial<R: Rng>(rng: &mut R, chart: &ChartRef, trunc: Trunc, w: u32, spec: &RandomSpec) -> Series {
    let k = chart.n_base();
    for _ in 0..64 {
        let mut exps = vec![0u16; chart.len()];
        for a in 0..k {
            let idx = chart.base(a);
            exps[idx] = if chart.is_odd(idx) {
                rng.gen_range(0..=1)
            } else {
                rng.gen_range(0..=spec.max_base_degree) as u16
            };
        }
        let mut left = w;
        let mut attempts = 0;
        while left > 0 && attempts < 256 {
            attempts += 1;
            let a = rng.gen_range(0..k);
            let idx = if rng.gen_bool(0.5) {
                chart.form(a)
            } else {
                chart.fiber(a)
            };
            if chart.is_odd(idx) && exps[idx] > 0 {
                continue;
            }
            exps[idx] += 1;
            left -= 1;
        }
        let m = Monomial::from_exponents(exps);
        if left == 0 && m.resdeg(chart) <= trunc.res && m.formdeg(chart) <= trunc.form {
            return Series::monomial(chart, trunc, m, rat(coefficient(rng, spec.bound)));
        }
    }
    Series::zero(chart, trunc)
}

/// Random element of ℤ-degree `zdeg` in base, form and fibre generators,
/// with at most `max_res` fibres and `max_form` forms.
pub fn random_element<R: Rng>(
    rng: &mut R,
    chart: &ChartRef,
    trunc: Trunc,
    zdeg: i32,
    max_res: u32,
    max_form: u32,
    spec: &RandomSpec,
) -> Series {
    let k = chart.n_base();
    let mut out = Series::zero(chart, trunc);
    let forms: Vec<usize> = (0..k).map(|a| chart.form(a)).collect();
    let fibres: Vec<usize> = (0..k).map(|a| chart.fiber(a)).collect();
    for r in 0..=max_res {
        for f in 0..=max_form {
            for fm in all_fibre_monomials(chart, &forms, f) {
                for em in all_fibre_monomials(chart, &fibres, r) {
                    if !rng.gen_bool(spec.density) {
                        continue;
                    }
                    let (prod, _) = match fm.mul(&em, chart) {
                        Some(x) => x,
                        None => continue,
                    };
                    let deg = zdeg - prod.zdeg(chart);
                    let coeff = random_base_series(rng, chart, trunc, deg, spec);
                    out = &out + &(&Series::monomial(chart, trunc, prod, rat(1)) * &coeff);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::GradedChart;
    use crate::fexp::validate_fexp;
    use rand::SeedableRng;

    #[test]
    fn random_maps_are_valid() {
        let c = GradedChart::from_degrees(&[("x1", 0), ("x2", 0), ("t1", 1), ("t2", -1)]).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for proper in [true, false] {
            let f = random_fexp(&mut rng, &c, Trunc::DEFAULT, 4, proper, &RandomSpec::default()).unwrap();
            assert!(validate_fexp(&f).passed());
            assert_eq!(f.is_proper(), proper || f.e1().is_identity());
        }
    }

    #[test]
    fn monomial_enumeration_respects_degree() {
        let c = GradedChart::from_degrees(&[("x", 0), ("t", 1), ("s", -1)]).unwrap();
        let ms = monomials_of_degree(&c, &[0, 1, 2], 1, 0);
        // 1, x, t*s, x*t*s
        assert_eq!(ms.len(), 4);
    }
}
