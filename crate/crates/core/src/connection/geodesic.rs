use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;

use super::Connection;
use crate::algebra::{rat, RingMorphism, Series};
use crate::error::{Error, Result};
use crate::fexp::FormalExpMap;

/// Commutative polynomial in `v^1..v^k` with rational coefficients. Kept
/// separate from the graded ring so the geodesic oracle shares no
/// arithmetic with the engine.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VPoly {
    pub terms: BTreeMap<Vec<u32>, BigRational>,
}

impl VPoly {
    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Self::default();
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::default();
        p.terms.insert(e, rat(1));
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exps: &[u32]) -> BigRational {
        self.terms.get(exps).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add(&self, other: &VPoly) -> VPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            let slot = out.terms.entry(e.clone()).or_insert_with(BigRational::zero);
            *slot += c;
            if slot.is_zero() {
                out.terms.remove(e);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> VPoly {
        if c.is_zero() {
            return VPoly::default();
        }
        VPoly {
            terms: self.terms.iter().map(|(e, x)| (e.clone(), x * c)).collect(),
        }
    }

    pub fn mul(&self, other: &VPoly) -> VPoly {
        let mut out = VPoly::default();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                let slot = out.terms.entry(e.clone()).or_insert_with(BigRational::zero);
                *slot += c1 * c2;
                if slot.is_zero() {
                    out.terms.remove(&e);
                }
            }
        }
        out
    }
}

/// Power series in `t` with `VPoly` coefficients, cut at `t^order`.
type TSeries = Vec<VPoly>;

fn t_mul(a: &TSeries, b: &TSeries, order: usize) -> TSeries {
    let mut out = vec![VPoly::default(); order + 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if i + j > order {
                break;
            }
            out[i + j] = out[i + j].add(&ai.mul(bj));
        }
    }
    out
}

/// Taylor coefficients of `exp_x(v) = z(1)` for the geodesic
/// `z̈^a + A^a_{bc}(z) ż^b ż^c = 0`, `z(0) = x`, `ż(0) = v`.
///
/// Entry `[a][n]` is the part of `exp_x(v)^a` homogeneous of degree `n` in
/// `v`, for `n = 0..=order`. It equals the `t^n` coefficient `c_n` of
/// `z(t)`, found from `(n+2)(n+1) c_{n+2} = −[A(z(t)) ż ż]_n`.
pub fn geodesic_taylor_oracle(conn: &Connection, x: &[BigRational], order: usize) -> Result<Vec<Vec<VPoly>>> {
    let chart = conn.chart();
    let k = chart.n_base();
    if !chart.all_even_degree_zero() || !chart.params().is_empty() {
        return Err(Error::Semantic {
            block: "connection".into(),
            message: "geodesics need an all-even degree-0 chart".into(),
        });
    }
    if x.len() != k {
        return Err(Error::Semantic {
            block: "point".into(),
            message: format!("expected {k} coordinates"),
        });
    }
    // c[a][n]
    let mut c: Vec<TSeries> = (0..k)
        .map(|a| {
            let mut s = vec![VPoly::default(); order + 1];
            s[0] = VPoly::constant(k, x[a].clone());
            if order >= 1 {
                s[1] = VPoly::var(k, a);
            }
            s
        })
        .collect();
    for n in 0..order.saturating_sub(1) {
        // only coefficients up to t^n of A(z(t)) ż ż are needed, and they
        // involve c up to n+1, all known
        let zdot: Vec<TSeries> = c
            .iter()
            .map(|s| {
                let mut d = vec![VPoly::default(); n + 1];
                for (m, dm) in d.iter_mut().enumerate() {
                    *dm = s[m + 1].scale(&rat(m as i64 + 1));
                }
                d
            })
            .collect();
        let z_cut: Vec<TSeries> = c.iter().map(|s| s[..=n].to_vec()).collect();
        for a in 0..k {
            let mut acc = VPoly::default();
            for ((a2, b, cc), sym) in conn.symbols() {
                if *a2 != a {
                    continue;
                }
                let mut val: TSeries = vec![VPoly::default(); n + 1];
                for (m, coeff) in sym.terms() {
                    let mut term: TSeries = vec![VPoly::default(); n + 1];
                    term[0] = VPoly::constant(k, coeff.clone());
                    for (i, &e) in m.exponents()[..k].iter().enumerate() {
                        for _ in 0..e {
                            term = t_mul(&term, &z_cut[i], n);
                        }
                    }
                    for (v, tv) in val.iter_mut().zip(&term) {
                        *v = v.add(tv);
                    }
                }
                let prod = t_mul(&t_mul(&val, &zdot[*b], n), &zdot[*cc], n);
                acc = acc.add(&prod[n]);
            }
            let denom = ((n + 2) * (n + 1)) as i64;
            c[a][n + 2] = acc.scale(&-BigRational::new(1.into(), denom.into()));
        }
    }
    Ok(c)
}

/// Jets of a formal exponential map at a numeric point `x`, in the layout
/// of [`geodesic_taylor_oracle`]: entry `[a][n]` is the resolution-degree-`n`
/// part of `fexp* z^a` with `z = x`, as a polynomial in the fibre variables.
pub fn fexp_jets_at(f: &FormalExpMap, x: &[BigRational]) -> Result<Vec<Vec<VPoly>>> {
    let chart = f.chart();
    let k = chart.n_base();
    if !chart.all_even_degree_zero() || x.len() != k {
        return Err(Error::Semantic {
            block: "point".into(),
            message: format!("expected {k} coordinates on an all-even degree-0 chart"),
        });
    }
    let t = f.trunc();
    let subs: BTreeMap<usize, Series> = (0..k)
        .map(|a| (chart.base(a), Series::constant(chart, t, x[a].clone())))
        .collect();
    let at_x = RingMorphism::with_images(chart, t, &subs)?;
    let mut out = vec![vec![VPoly::default(); t.res as usize + 1]; k];
    for (a, row) in out.iter_mut().enumerate() {
        let p = at_x.apply(f.pullback(a))?;
        for (m, c) in p.terms() {
            let e: Vec<u32> = (0..k).map(|b| u32::from(m.exponent(chart.fiber(b)))).collect();
            let n = e.iter().sum::<u32>() as usize;
            let mut term = VPoly::default();
            term.terms.insert(e, c.clone());
            row[n] = row[n].add(&term);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_series, GradedChart, Trunc};

    #[test]
    fn flat_connection_gives_straight_lines() {
        let ch = GradedChart::from_degrees(&[("x", 0), ("y", 0)]).unwrap();
        let conn = Connection::flat(&ch, Trunc::DEFAULT);
        let c = geodesic_taylor_oracle(&conn, &[rat(1), rat(2)], 4).unwrap();
        assert_eq!(c[0][0], VPoly::constant(2, rat(1)));
        assert_eq!(c[0][1], VPoly::var(2, 0));
        assert!(c[0][2..].iter().all(VPoly::is_zero));
    }

    #[test]
    fn one_dimensional_constant_symbol() {
        // z'' = -a z'^2 integrates to z = x + ln(1 + a v t) / a
        let ch = GradedChart::from_degrees(&[("x", 0)]).unwrap();
        let t = Trunc::DEFAULT;
        let mut m = BTreeMap::new();
        m.insert((0, 0, 0), parse_series("3", &ch, t).unwrap());
        let conn = Connection::new(&ch, t, m).unwrap();
        let c = geodesic_taylor_oracle(&conn, &[rat(0)], 3).unwrap();
        assert_eq!(c[0][2].coefficient(&[2]), crate::algebra::ratio(-3, 2));
        assert_eq!(c[0][3].coefficient(&[3]), crate::algebra::ratio(3, 1));
    }
}
