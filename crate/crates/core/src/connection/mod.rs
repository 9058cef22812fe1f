//! Torsion-free connections, the superconnection `d_∇`, its completion to a
//! flat Grothendieck connection, and the inverse extraction.

mod geodesic;

use std::collections::BTreeMap;

use num_rational::BigRational;

use crate::algebra::{ChartRef, GradedChart, Grading, Series, Trunc};
use crate::derivation::Derivation;
use crate::error::{Error, Result};
use crate::fexp::{check_flatness, grothendieck_from_fexp, FormalExpMap, GrothendieckConnection};
use crate::report::{Check, Report};
use crate::resolution::{homotopy_h, HomotopyData};

pub use geodesic::{fexp_jets_at, geodesic_taylor_oracle, VPoly};

/// Christoffel symbols `A^a_{bc}(z)`, stored under the key `(a, b, c)`.
/// Missing entries are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    chart: ChartRef,
    trunc: Trunc,
    christoffel: BTreeMap<(usize, usize, usize), Series>,
}

impl Connection {
    /// Validates degrees, dependence on base coordinates only, and graded
    /// symmetry `A^a_{bc} = (−1)^{|b||c|} A^a_{cb}`.
    pub fn new(chart: &ChartRef, trunc: Trunc, christoffel: BTreeMap<(usize, usize, usize), Series>) -> Result<Self> {
        let k = chart.n_base();
        let name = |i: usize| chart.generator(chart.base(i)).name.clone();
        for (&(a, b, c), s) in &christoffel {
            if a >= k || b >= k || c >= k {
                return Err(Error::Semantic {
                    block: "connection".into(),
                    message: format!("index ({a}, {b}, {c}) out of range"),
                });
            }
            if !GradedChart::same(s.chart(), chart) || s.trunc() != trunc {
                return Err(Error::ChartMismatch("Christoffel symbol".into()));
            }
            if !s.is_base_only() {
                return Err(Error::InvalidConnection {
                    generator: name(a),
                    reason: format!("A^{}_{{{}{}}} depends on forms or fibres", name(a), name(b), name(c)),
                });
            }
            let deg = chart.base_degree(a) - chart.base_degree(b) - chart.base_degree(c);
            if !s.is_homogeneous(deg) {
                return Err(Error::Inhomogeneous {
                    generator: format!("A^{}_{{{}{}}}", name(a), name(b), name(c)),
                    expected: deg,
                });
            }
        }
        let conn = Self {
            chart: chart.clone(),
            trunc,
            christoffel: christoffel.into_iter().filter(|(_, s)| !s.is_zero()).collect(),
        };
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    let lhs = conn.symbol(a, b, c);
                    let rhs = conn.symbol(a, c, b);
                    let odd = chart.is_odd(chart.base(b)) && chart.is_odd(chart.base(c));
                    let rhs = if odd { -rhs } else { rhs };
                    if lhs != rhs {
                        return Err(Error::InvalidConnection {
                            generator: name(a),
                            reason: format!("torsion: A^{}_{{{}{}}} not graded symmetric", name(a), name(b), name(c)),
                        });
                    }
                }
            }
        }
        Ok(conn)
    }

    pub fn flat(chart: &ChartRef, trunc: Trunc) -> Self {
        Self {
            chart: chart.clone(),
            trunc,
            christoffel: BTreeMap::new(),
        }
    }

    pub fn chart(&self) -> &ChartRef {
        &self.chart
    }

    pub fn trunc(&self) -> Trunc {
        self.trunc
    }

    /// `A^a_{bc}`.
    pub fn symbol(&self, a: usize, b: usize, c: usize) -> Series {
        self.christoffel
            .get(&(a, b, c))
            .cloned()
            .unwrap_or_else(|| Series::zero(&self.chart, self.trunc))
    }

    pub fn symbols(&self) -> &BTreeMap<(usize, usize, usize), Series> {
        &self.christoffel
    }
}

/// `d_∇`: `z^a ↦ dz^a`, `dz^a ↦ 0`, `ε^a ↦ −dz^b ε^c A^a_{cb}`.
pub fn nabla_superconnection(conn: &Connection) -> Derivation {
    let chart = conn.chart();
    let t = conn.trunc();
    let mut images = Derivation::de_rham(chart, t).images().clone();
    for a in 0..chart.n_base() {
        let mut img = Series::zero(chart, t);
        for b in 0..chart.n_base() {
            for c in 0..chart.n_base() {
                let s = conn.symbol(a, c, b);
                if s.is_zero() {
                    continue;
                }
                let dzb = Series::generator(chart, t, chart.form(b));
                let ec = Series::generator(chart, t, chart.fiber(c));
                img = &img - &(&(&dzb * &ec) * &s);
            }
        }
        images.insert(chart.fiber(a), img);
    }
    Derivation::new(chart, t, 1, images).expect("homogeneous by construction")
}

/// One step of the completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HptStep {
    pub k: u32,
    /// Weight-`k` piece of `½[D^{(k)}, D^{(k)}]`.
    pub obstruction: Derivation,
    /// The new piece `D_{k+1}`.
    pub correction: Derivation,
    /// `deg_HT` weight of the obstruction's values on fibre generators.
    pub weight: i64,
}

#[derive(Debug, Clone)]
pub struct HptResult {
    pub connection: GrothendieckConnection,
    pub steps: Vec<HptStep>,
    pub report: Report,
}

/// Homotopy data of the canonical proper map on `chart`.
pub fn canonical_homotopy(chart: &ChartRef, trunc: Trunc) -> HomotopyData {
    HomotopyData::from_connection(&GrothendieckConnection::canonical(chart, trunc)).expect("canonical contraction")
}

/// Completes `δ + d_∇` to a flat Grothendieck connection.
///
/// At step `k` the obstruction `S_k` (weight-`k` piece of `D^{(k)}²`) is
/// `δ`-closed and vanishes on `z` and `dz`. The correction is defined on
/// fibre generators only, `D_{k+1}(ε^a) = −H(S_k(ε^a))`, so the lift
/// conditions `D(z) = dz`, `D(dz) = 0` survive every step. Each step
/// asserts `[δ, S_k] = 0` and `[δ, D_{k+1}] = −S_k`.
pub fn hpt_complete(conn: &Connection) -> Result<HptResult> {
    let chart = conn.chart().clone();
    let t = conn.trunc();
    let delta = Derivation::canonical_delta(&chart, t);
    let d0 = nabla_superconnection(conn);
    let h = canonical_homotopy(&chart, t);
    let mut report = Report::new("homological perturbation completion");
    let mut torsion = Check::new("[D_-1, D_0] = 0");
    let tor = delta.commutator(&d0)?;
    for (&idx, img) in tor.images() {
        torsion.residual(chart.generator(idx).name.clone(), img.clone());
    }
    let torsion_ok = torsion.passed();
    report.push(torsion);
    if !torsion_ok {
        return Err(Error::Assertion("[D_-1, D_0] ≠ 0 for a torsion-free connection".into()));
    }
    let mut d = delta.add(&d0);
    let mut steps = Vec::new();
    let mut bianchi = Check::new("[D_-1, S_k] = 0");
    let mut solved = Check::new("[D_-1, D_k+1] + S_k = 0");
    for k in 0..t.res.saturating_sub(1) {
        let s = d.square_resdeg_piece(i64::from(k));
        let ds = delta.commutator(&s)?;
        for (&idx, img) in ds.images() {
            bianchi.residual(format!("k={k} {}", chart.generator(idx).name), img.clone());
        }
        let mut images = BTreeMap::new();
        let mut weight = i64::from(k) + 3;
        for (&idx, img) in s.images() {
            let g = chart.generator(idx);
            if g.klass != crate::algebra::Klass::Fiber {
                return Err(Error::Assertion(format!("obstruction at k={k} acts on `{}`", g.name)));
            }
            let ws = img.weights(Grading::DegHt);
            if ws != [i64::from(k) + 3] {
                return Err(Error::Assertion(format!(
                    "obstruction at k={k} has deg_HT weights {ws:?}"
                )));
            }
            weight = ws[0];
            images.insert(idx, -homotopy_h(&h, img));
        }
        let corr = Derivation::new(&chart, t, 1, images)?;
        corr.check_weight(Grading::ResDeg, i64::from(k) + 1, "D_k+1")?;
        let check = delta.commutator(&corr)?.add(&s);
        for (&idx, img) in check.images() {
            solved.residual(format!("k={k} {}", chart.generator(idx).name), img.clone());
        }
        d = d.add(&corr);
        steps.push(HptStep {
            k,
            obstruction: s,
            correction: corr,
            weight,
        });
    }
    let (b_ok, s_ok) = (bianchi.passed(), solved.passed());
    report.push(bianchi);
    report.push(solved);
    if !b_ok || !s_ok {
        return Err(Error::Assertion("homological perturbation step failed".into()));
    }
    let g = GrothendieckConnection::new(d)?;
    let mut flat = Check::new("D^2 = 0");
    for r in check_flatness(&g) {
        flat.residual(format!("{} weight {}", r.generator, r.weight), r.residual);
    }
    let flat_ok = flat.passed();
    report.push(flat);
    if !flat_ok {
        return Err(Error::Assertion("completed connection is not flat".into()));
    }
    report.fact("steps", steps.len());
    Ok(HptResult {
        connection: g,
        steps,
        report,
    })
}

/// The derivation `−½[ζ, (d_∇)²]` with the canonical `ζ`. It solves the
/// same weight-0 equation `[δ, X] = −(d_∇)²` as the first completion step
/// but does not vanish on `dz` when the curvature is nonzero.
pub fn commutator_step(conn: &Connection) -> Result<Derivation> {
    let chart = conn.chart();
    let h = canonical_homotopy(chart, conn.trunc());
    let sq = nabla_superconnection(conn).square();
    Ok(h.zeta.commutator(&sq)?.scale(&BigRational::new((-1).into(), 2.into())))
}

/// The torsion-free connection of a proper formal exponential map, read
/// from `D₀(ε^a) = −dz^b ε^c A^a_{cb}`.
pub fn connection_from_fexp(f: &FormalExpMap) -> Result<Connection> {
    if !f.is_proper() {
        return Err(Error::NotProper);
    }
    let g = grothendieck_from_fexp(f)?;
    connection_from_grothendieck(&g)
}

/// Same extraction starting from a Grothendieck connection of a proper map.
pub fn connection_from_grothendieck(g: &GrothendieckConnection) -> Result<Connection> {
    let chart = g.chart().clone();
    let t = g.trunc();
    if !g.c_minus1().neg().is_identity() {
        return Err(Error::NotProper);
    }
    let d0 = g.derivation().piece(Grading::ResDeg, 0);
    let k = chart.n_base();
    let mut symbols = BTreeMap::new();
    for a in 0..k {
        let img = d0.image(chart.fiber(a));
        for b in 0..k {
            let db = img.partial(chart.form(b));
            for c in 0..k {
                let s = -&db.partial(chart.fiber(c));
                if !s.is_zero() {
                    symbols.insert((a, c, b), s);
                }
            }
        }
    }
    let conn = Connection::new(&chart, t, symbols)?;
    if nabla_superconnection(&conn) != d0 {
        return Err(Error::Assertion("D_0 is not of superconnection form".into()));
    }
    Ok(conn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_series, ratio};
    use crate::fexp::fexp_from_grothendieck;

    fn r2() -> Connection {
        let ch = GradedChart::from_degrees(&[("x1", 0), ("x2", 0)]).unwrap();
        let t = Trunc::DEFAULT;
        let mut m = BTreeMap::new();
        m.insert((0, 1, 1), parse_series("x1", &ch, t).unwrap());
        Connection::new(&ch, t, m).unwrap()
    }

    #[test]
    fn flat_connection_needs_no_correction() {
        let ch = GradedChart::from_degrees(&[("x", 0), ("th", 1)]).unwrap();
        let conn = Connection::flat(&ch, Trunc::DEFAULT);
        let res = hpt_complete(&conn).unwrap();
        assert!(res.steps.iter().all(|s| s.obstruction.images().is_empty()));
        assert_eq!(res.connection, GrothendieckConnection::canonical(&ch, Trunc::DEFAULT));
    }

    #[test]
    fn superconnection_images() {
        let conn = r2();
        let ch = conn.chart().clone();
        let d0 = nabla_superconnection(&conn);
        let t = Trunc::DEFAULT;
        assert_eq!(d0.image(ch.fiber(0)), parse_series("-x1*dx2*ex2", &ch, t).unwrap());
        assert_eq!(d0.image(ch.base(0)), parse_series("dx1", &ch, t).unwrap());
        assert!(d0.image(ch.form(1)).is_zero());
    }

    #[test]
    fn first_obstruction_is_curvature() {
        // D0(ex1) = -x1 dx2 ex2, so D0^2(ex1) = -dx1 dx2 ex2 by hand
        let conn = r2();
        let ch = conn.chart().clone();
        let t = Trunc::DEFAULT;
        let res = hpt_complete(&conn).unwrap();
        let s0 = &res.steps[0].obstruction;
        assert_eq!(s0.image(ch.fiber(0)), parse_series("-dx1*dx2*ex2", &ch, t).unwrap());
        assert!(s0.image(ch.fiber(1)).is_zero());
        assert_eq!(res.steps[0].weight, 3);
        // -H of it: weight 3, zeta(dx) = -ex
        assert_eq!(
            res.steps[0].correction.image(ch.fiber(0)),
            parse_series("1/3*dx1*ex2^2 - 1/3*dx2*ex1*ex2", &ch, t).unwrap()
        );
        assert!(res.report.passed());
    }

    #[test]
    fn commutator_step_moves_dz() {
        let conn = r2();
        let ch = conn.chart().clone();
        let step = commutator_step(&conn).unwrap();
        assert!(!step.image(ch.form(0)).is_zero());
        let res = hpt_complete(&conn).unwrap();
        assert!(res.steps[0].correction.image(ch.form(0)).is_zero());
    }

    #[test]
    fn round_trip_through_fexp() {
        let conn = r2();
        let res = hpt_complete(&conn).unwrap();
        let f = fexp_from_grothendieck(&res.connection).unwrap();
        assert!(f.is_proper());
        assert_eq!(connection_from_fexp(&f).unwrap(), conn);
        // the resolution-degree-N piece depends on the unknown e_{N+1}
        let g = grothendieck_from_fexp(&f).unwrap();
        assert_eq!(g.up_to_resdeg(5), res.connection.up_to_resdeg(5));
    }

    #[test]
    fn square_pieces_agree() {
        let res = hpt_complete(&r2()).unwrap();
        let d = nabla_superconnection(&r2())
            .add(&Derivation::canonical_delta(&r2().chart().clone(), r2().trunc()))
            .add(&res.steps[0].correction);
        let full = d.square();
        for k in -1..6 {
            assert_eq!(d.square_resdeg_piece(k), full.piece(Grading::ResDeg, k), "k={k}");
        }
    }

    #[test]
    fn jets_match_geodesics() {
        let conn = r2();
        let f = fexp_from_grothendieck(&hpt_complete(&conn).unwrap().connection).unwrap();
        let x = [ratio(1, 2), ratio(-3, 1)];
        let oracle = geodesic_taylor_oracle(&conn, &x, 4).unwrap();
        let jets = fexp_jets_at(&f, &x).unwrap();
        for a in 0..2 {
            assert_eq!(jets[a][..=4], oracle[a][..]);
        }
        // -1/2 A^0_{11}(x) v2^2
        assert_eq!(oracle[0][2].coefficient(&[0, 2]), ratio(-1, 4));
    }
}
