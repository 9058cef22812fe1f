//! QP structures and their linearization at a body point.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::algebra::{BaseSpec, ChartRef, GradedChart, Klass, Monomial, RingMorphism, Series, Trunc};
use crate::derivation::Derivation;
use crate::error::{Error, Result};
use crate::fexp::{apply_fibre_change, canonicalize, FormalExpMap};
use crate::report::{Check, Report};

/// A degree-1 vector field `Q` on the base coordinates with a constant
/// Darboux form `ω = ½ dz^a ω_ab dz^b` of degree `P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QPStructure {
    pub chart: ChartRef,
    pub trunc: Trunc,
    pub p: i32,
    pub omega: Vec<Vec<BigRational>>,
    pub q: Derivation,
}

impl QPStructure {
    /// `q_images[a]` is `Q(z^a)`; missing entries are zero.
    pub fn new(
        chart: &ChartRef,
        trunc: Trunc,
        p: i32,
        omega: Vec<Vec<BigRational>>,
        q_images: BTreeMap<usize, Series>,
    ) -> Result<Self> {
        let k = chart.n_base();
        if omega.len() != k || omega.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidQp(format!("omega must be {k}x{k}")));
        }
        let mut images = BTreeMap::new();
        for (a, img) in q_images {
            if a >= k {
                return Err(Error::InvalidQp(format!("no base coordinate {a}")));
            }
            if !img.is_base_only() {
                return Err(Error::InvalidQp(format!(
                    "Q({}) must be a function of the base coordinates",
                    chart.generator(chart.base(a)).name
                )));
            }
            images.insert(chart.base(a), img);
        }
        let q = Derivation::new(chart, trunc, 1, images)?;
        Ok(Self {
            chart: chart.clone(),
            trunc,
            p,
            omega,
            q,
        })
    }

    pub fn omega_form(&self) -> Series {
        two_form(&self.chart, self.trunc, &self.omega)
    }
}

/// `½ dz^a ω_ab dz^b` on `chart`.
fn two_form(chart: &ChartRef, trunc: Trunc, omega: &[Vec<BigRational>]) -> Series {
    let half = BigRational::new(1.into(), 2.into());
    let mut out = Series::zero(chart, trunc);
    for (a, row) in omega.iter().enumerate() {
        for (b, w) in row.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let term =
                &Series::generator(chart, trunc, chart.form(a)) * &Series::generator(chart, trunc, chart.form(b));
            out = &out + &term.scale(&(w * &half));
        }
    }
    out
}

fn rank(m: &[Vec<BigRational>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = m.to_vec();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, piv);
        let inv = m[r][c].recip();
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = &m[i][c] * &inv;
                for j in c..cols {
                    let sub = &f * &m[r][j];
                    m[i][j] -= sub;
                }
            }
        }
        r += 1;
    }
    r
}

fn omega_checks(chart: &ChartRef, p: i32, omega: &[Vec<BigRational>], report: &mut Report) {
    let k = chart.n_base();
    let name = |a: usize| chart.generator(chart.base(a)).name.clone();
    let mut deg = Check::new("omega_ab != 0 only if deg z^a + deg z^b = P");
    let mut sym = Check::new("omega_ab = (-1)^((|a|+1)(|b|+1)) omega_ba");
    for a in 0..k {
        for b in 0..k {
            let (da, db) = (chart.base_degree(a), chart.base_degree(b));
            if !omega[a][b].is_zero() && da + db != p {
                deg.fail(format!("omega[{}][{}] pairs degrees {da} and {db}", name(a), name(b)));
            }
            let sign = if ((da + 1) * (db + 1)).rem_euclid(2) == 1 {
                -1
            } else {
                1
            };
            if omega[a][b] != &omega[b][a] * BigRational::from_integer(sign.into()) {
                sym.fail(format!(
                    "omega[{}][{}] vs omega[{}][{}]",
                    name(a),
                    name(b),
                    name(b),
                    name(a)
                ));
            }
        }
    }
    report.push(deg);
    report.push(sym);
    let mut nd = Check::new("omega nondegenerate");
    let r = rank(omega);
    if r < k {
        nd.fail(format!("rank {r} < {k}"));
    }
    report.push(nd);
}

/// Degree rule, graded antisymmetry and nondegeneracy of `ω`, `Q² = 0`, and
/// `L_Q ω = 0` with `L_Q` the tangent lift of `Q`.
pub fn validate_qp(s: &QPStructure) -> Report {
    let chart = &s.chart;
    let mut report = Report::new("QP structure");
    omega_checks(chart, s.p, &s.omega, &mut report);
    let mut sq = Check::new("Q^2 = 0");
    for (&idx, img) in s.q.square().images() {
        sq.residual(chart.generator(idx).name.clone(), img.clone());
    }
    report.push(sq);
    let mut lie = Check::new("L_Q omega = 0");
    lie.residual("omega", s.q.tangent_lift().apply(&s.omega_form()));
    report.push(lie);
    report.fact("P", s.p);
    report
}

/// One bracket coefficient `l_n(ε^{b_1}, …, ε^{b_n})^a` with
/// `b_1 ≤ … ≤ b_n`; the other orderings follow by graded symmetry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bracket {
    pub arity: u32,
    pub output: usize,
    pub inputs: Vec<usize>,
    /// A polynomial in the chart parameters; a rational for numeric points.
    pub coefficient: Series,
}

/// The linearization `Q_x` of a QP structure at a point, with its brackets
/// read from `Q_x(ε^a) = −Σ_n (1/n!) l_n(ε, …, ε)^a`.
#[derive(Debug, Clone)]
pub struct LInftyPackage {
    /// Chart of the QP structure; bracket indices refer to its base order.
    pub source: ChartRef,
    /// Chart whose base coordinates are the fibre directions `ε^a` at `x`.
    pub chart: ChartRef,
    pub trunc: Trunc,
    pub point: Vec<Series>,
    pub q: Derivation,
    pub omega: Vec<Vec<BigRational>>,
    pub brackets: Vec<Bracket>,
    pub curved: bool,
    pub report: Report,
}

/// Chart with base coordinates named after the fibre generators of
/// `source`, same degrees, same parameters.
pub fn linearized_chart(source: &ChartRef) -> Result<ChartRef> {
    let base = (0..source.n_base())
        .map(|a| BaseSpec::new(source.generator(source.fiber(a)).name.clone(), source.base_degree(a)))
        .collect();
    GradedChart::new(base, source.params())
}

fn split_params(m: &Monomial, chart: &GradedChart) -> (Vec<u16>, Monomial) {
    let k = chart.n_base();
    let e = m.exponents();
    let base = e[..k].to_vec();
    let mut rest = e.to_vec();
    for x in &mut rest[..k] {
        *x = 0;
    }
    (base, Monomial::from_exponents(rest))
}

fn factorial(n: u16) -> BigInt {
    (1..=u32::from(n)).fold(BigInt::one(), |acc, i| acc * i)
}

impl LInftyPackage {
    /// Builds the package from `Q_x` directly, without requiring that it
    /// came from a valid QP structure.
    pub fn from_parts(
        source: &ChartRef,
        point: Vec<Series>,
        q: Derivation,
        omega: Vec<Vec<BigRational>>,
    ) -> Result<Self> {
        let chart = q.chart().clone();
        let t = q.trunc();
        if q.zdeg() != 1 {
            return Err(Error::InvalidQp("Q_x must have degree 1".into()));
        }
        if chart.n_base() != source.n_base() || omega.len() != chart.n_base() {
            return Err(Error::ChartMismatch("linearized chart".into()));
        }
        let mut brackets = Vec::new();
        for a in 0..chart.n_base() {
            let mut grouped: BTreeMap<Vec<u16>, Series> = BTreeMap::new();
            for (m, c) in q.image(chart.base(a)).terms() {
                let (exps, rest) = split_params(m, &chart);
                let scale: BigInt = exps.iter().map(|&e| factorial(e)).product();
                let coeff = Series::monomial(&chart, t, rest, -c * BigRational::from_integer(scale));
                let slot = grouped.entry(exps).or_insert_with(|| Series::zero(&chart, t));
                *slot = &*slot + &coeff;
            }
            for (exps, coefficient) in grouped {
                if coefficient.is_zero() {
                    continue;
                }
                let inputs: Vec<usize> = exps
                    .iter()
                    .enumerate()
                    .flat_map(|(b, &e)| std::iter::repeat_n(b, usize::from(e)))
                    .collect();
                brackets.push(Bracket {
                    arity: inputs.len() as u32,
                    output: a,
                    inputs,
                    coefficient,
                });
            }
        }
        brackets.sort_by(|x, y| (x.arity, x.output, &x.inputs).cmp(&(y.arity, y.output, &y.inputs)));
        let curved = brackets.iter().any(|b| b.arity == 0);
        let mut report = Report::new("linearization");
        let order = t.res.saturating_sub(1);
        let mut sq = Check::new(format!("Q_x^2 = 0 through order {order}"));
        for (&idx, img) in q.square().images() {
            let low = img.filter(|m| split_params(m, &chart).0.iter().map(|&e| u32::from(e)).sum::<u32>() <= order);
            sq.residual(chart.generator(idx).name.clone(), low);
        }
        report.push(sq);
        let mut pkg = Self {
            source: source.clone(),
            chart,
            trunc: t,
            point,
            q,
            omega,
            brackets,
            curved,
            report,
        };
        let cyclic = check_cyclic(&pkg);
        pkg.report.checks.extend(cyclic.checks);
        pkg.report.fact("curved", curved);
        pkg.report.fact("brackets", pkg.brackets.len());
        Ok(pkg)
    }

    pub fn omega_form(&self) -> Series {
        two_form(&self.chart, self.trunc, &self.omega)
    }

    /// Brackets of one arity.
    pub fn arity(&self, n: u32) -> impl Iterator<Item = &Bracket> {
        self.brackets.iter().filter(move |b| b.arity == n)
    }

    /// One line per bracket: `arity output inputs coefficient`, with inputs
    /// comma-separated (`-` for none) and names from the source chart.
    pub fn bracket_table(&self) -> String {
        let name = |a: usize| self.source.generator(self.source.base(a)).name.clone();
        let mut out = String::new();
        for b in &self.brackets {
            let inputs = if b.inputs.is_empty() {
                "-".to_string()
            } else {
                b.inputs.iter().map(|&i| name(i)).collect::<Vec<_>>().join(",")
            };
            out.push_str(&format!(
                "{} {} {} {}\n",
                b.arity,
                name(b.output),
                inputs,
                b.coefficient
            ));
        }
        out
    }
}

/// `L_{Q_x} ω_x = 0` as a whole and arity by arity. The arity-`n` piece of
/// `Q_x` contributes the part of `L_{Q_x} ω_x` of polynomial degree `n − 1`,
/// which vanishes exactly when `ω_ab l_n` is graded cyclic.
pub fn check_cyclic(pkg: &LInftyPackage) -> Report {
    let chart = &pkg.chart;
    let omega = pkg.omega_form();
    let mut report = Report::new("cyclic inner product");
    let order = pkg.trunc.res.saturating_sub(1);
    let degree = |m: &Monomial| split_params(m, chart).0.iter().map(|&e| u32::from(e)).sum::<u32>();
    let mut whole = Check::new(format!("L_Q_x omega_x = 0 through order {order}"));
    whole.residual(
        "omega_x",
        pkg.q.tangent_lift().apply(&omega).filter(|m| degree(m) <= order),
    );
    report.push(whole);
    let max = pkg.brackets.iter().map(|b| b.arity).max().unwrap_or(0);
    for n in 0..=max {
        let qn = pkg.q.map_images(|_, s| s.filter(|m| degree(m) == n));
        let mut c = Check::new(format!("arity {n}: omega l_{n} graded cyclic"));
        c.residual("omega_x", qn.tangent_lift().apply(&omega));
        report.push(c);
    }
    report
}

/// Values of the base coordinates at `x`: each must be free of base, form
/// and fibre generators, and zero unless the coordinate has degree 0.
fn check_point(chart: &ChartRef, point: &[Series]) -> Result<()> {
    if point.len() != chart.n_base() {
        return Err(Error::Semantic {
            block: "point".into(),
            message: format!("expected {} values, got {}", chart.n_base(), point.len()),
        });
    }
    for (a, v) in point.iter().enumerate() {
        let name = &chart.generator(chart.base(a)).name;
        let only_params = v.terms().all(|(m, _)| {
            m.exponents()
                .iter()
                .enumerate()
                .all(|(i, &e)| e == 0 || chart.generator(i).klass == Klass::Param)
        });
        if !only_params {
            return Err(Error::NotBodyPoint(format!("value of `{name}` involves coordinates")));
        }
        if chart.base_degree(a) != 0 && !v.is_zero() {
            return Err(Error::NotBodyPoint(format!(
                "`{name}` has degree {} but value {v}",
                chart.base_degree(a)
            )));
        }
    }
    Ok(())
}

/// A parameter-only series moved to another chart with the same parameters.
fn params_to(v: &Series, target: &ChartRef, t: Trunc) -> Result<Series> {
    let src = v.chart();
    let mut terms = Vec::new();
    for (m, c) in v.terms() {
        let mut e = vec![0u16; target.len()];
        for (i, &x) in m.exponents().iter().enumerate() {
            if x > 0 {
                e[target.index_of(&src.generator(i).name)?] = x;
            }
        }
        terms.push((Monomial::from_exponents(e), c.clone()));
    }
    Series::from_terms(target, t, terms)
}

/// Numeric point as constant series.
pub fn numeric_point(chart: &ChartRef, trunc: Trunc, values: &[BigRational]) -> Vec<Series> {
    values
        .iter()
        .map(|v| Series::constant(chart, trunc, v.clone()))
        .collect()
}

/// `Q_x(ε^a) = fexp_x*(Q(z^a))` with `fexp_x* z^a = x^a + ε^a`.
///
/// A non-canonical `f` is first brought to canonical form by a fibre
/// change, so the package is that of the canonical map; it is related to
/// the one of `f` by the same (formal) change of fibre coordinates.
pub fn linearize_at_point(s: &QPStructure, f: &FormalExpMap, point: &[Series]) -> Result<LInftyPackage> {
    let chart = s.chart.clone();
    let t = s.trunc;
    if !GradedChart::same(f.chart(), &chart) {
        return Err(Error::ChartMismatch("fexp and QP structure".into()));
    }
    let qp_report = validate_qp(s);
    if !qp_report.passed() {
        return Err(Error::InvalidQp(qp_report.first_violation().unwrap_or_default()));
    }
    check_point(&chart, point)?;
    let canonical = FormalExpMap::canonical(&chart, f.trunc());
    let f = if f.pullbacks() == canonical.pullbacks() {
        f.clone()
    } else {
        apply_fibre_change(f, &canonicalize(f)?)?
    };
    if f.pullbacks() != canonical.pullbacks() {
        return Err(Error::Assertion("canonicalization did not reach z + ε".into()));
    }
    let lin = linearized_chart(&chart)?;
    let x: Vec<Series> = point.iter().map(|v| params_to(v, &lin, t)).collect::<Result<_>>()?;
    let images = (0..chart.len())
        .map(|idx| {
            let g = chart.generator(idx);
            match g.klass {
                Klass::Base => Ok(&x[g.index] + &Series::generator(&lin, t, lin.base(g.index))),
                Klass::Param => Ok(Series::generator(&lin, t, lin.index_of(&g.name)?)),
                _ => Ok(Series::zero(&lin, t)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let at_x = RingMorphism::new(&chart, &lin, t, images)?;
    let mut q_images = BTreeMap::new();
    for a in 0..chart.n_base() {
        q_images.insert(lin.base(a), at_x.apply(&s.q.image(chart.base(a)))?);
    }
    let q = Derivation::new(&lin, t, 1, q_images)?;
    let mut pkg = LInftyPackage::from_parts(&chart, point.to_vec(), q, s.omega.clone())?;
    let mut nd = Report::new("");
    omega_checks(&lin, s.p, &pkg.omega, &mut nd);
    pkg.report.checks.extend(nd.checks);
    Ok(pkg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_series, rat};

    /// 2-step nilpotent: [e_i, e_j] = ε_ijk f_k.
    fn ce(omega_e3f3: i64) -> QPStructure {
        let c = GradedChart::from_degrees(&[("e1", 1), ("e2", 1), ("e3", 1), ("f1", 1), ("f2", 1), ("f3", 1)]).unwrap();
        let t = Trunc::DEFAULT;
        let mut q = BTreeMap::new();
        // Q(ξ^{f_k}) = −½ f^k_{ij} ξ^i ξ^j = −ξ^i ξ^j for (i, j, k) cyclic
        q.insert(3, parse_series("-e2*e3", &c, t).unwrap());
        q.insert(4, parse_series("-e3*e1", &c, t).unwrap());
        q.insert(5, parse_series("-e1*e2", &c, t).unwrap());
        let mut w = vec![vec![rat(0); 6]; 6];
        for i in 0..3 {
            let v = if i == 2 { rat(omega_e3f3) } else { rat(1) };
            w[i][i + 3] = v.clone();
            w[i + 3][i] = v;
        }
        QPStructure::new(&c, t, 2, w, q).unwrap()
    }

    #[test]
    fn ce_is_valid_with_structure_constant_brackets() {
        let s = ce(1);
        assert!(validate_qp(&s).passed(), "{}", validate_qp(&s).render());
        let f = FormalExpMap::canonical(&s.chart, s.trunc);
        let pkg = linearize_at_point(&s, &f, &numeric_point(&s.chart, s.trunc, &vec![rat(0); 6])).unwrap();
        assert!(pkg.report.passed(), "{}", pkg.report.render());
        assert_eq!(pkg.bracket_table(), "2 f1 e2,e3 1\n2 f2 e1,e3 -1\n2 f3 e1,e2 1\n");
        assert!(!pkg.curved);
    }

    #[test]
    fn non_invariant_pairing() {
        let s = ce(2);
        let r = validate_qp(&s);
        assert!(!r.passed());
        let good = ce(1);
        let f = FormalExpMap::canonical(&good.chart, good.trunc);
        let pkg = linearize_at_point(&good, &f, &numeric_point(&good.chart, good.trunc, &vec![rat(0); 6])).unwrap();
        let forced = LInftyPackage::from_parts(&pkg.source, pkg.point.clone(), pkg.q.clone(), s.omega.clone()).unwrap();
        let cyc = check_cyclic(&forced);
        let failing: Vec<&str> = cyc
            .checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.identity.as_str())
            .collect();
        assert!(failing.iter().any(|i| i.starts_with("arity 2")));
        assert!(!failing.iter().any(|i| i.starts_with("arity 1")));
    }

    #[test]
    fn jacobi_violation_detected() {
        // [e1,e2] = e2, [e2,e3] = e1: Jacobiator is -e1
        let c = GradedChart::from_degrees(&[("a", 1), ("b", 1), ("c", 1)]).unwrap();
        let t = Trunc::DEFAULT;
        let mut q = BTreeMap::new();
        q.insert(0, parse_series("-b*c", &c, t).unwrap());
        q.insert(1, parse_series("-a*b", &c, t).unwrap());
        let w = vec![
            vec![rat(1), rat(0), rat(0)],
            vec![rat(0), rat(1), rat(0)],
            vec![rat(0), rat(0), rat(1)],
        ];
        let s = QPStructure::new(&c, t, 2, w, q).unwrap();
        let r = validate_qp(&s);
        let sq = r.checks.iter().find(|c| c.identity == "Q^2 = 0").unwrap();
        assert!(!sq.passed());
    }

    #[test]
    fn rank_of_singular_matrix() {
        assert_eq!(rank(&[vec![rat(1), rat(2)], vec![rat(2), rat(4)]]), 1);
        assert_eq!(rank(&[vec![rat(0), rat(1)], vec![rat(1), rat(0)]]), 2);
    }

    /// T*[1]R^2 with π^{12} = x1 x2; parameters y1, y2 for a symbolic point.
    fn poisson() -> QPStructure {
        let specs = ["x1", "x2"]
            .iter()
            .map(|n| BaseSpec::new(*n, 0))
            .chain(["p1", "p2"].iter().map(|n| BaseSpec::new(*n, 1)));
        let c = GradedChart::new(specs.collect(), vec!["y1".into(), "y2".into()]).unwrap();
        let t = Trunc::DEFAULT;
        let mut q = BTreeMap::new();
        q.insert(0, parse_series("x1*x2*p2", &c, t).unwrap());
        q.insert(1, parse_series("-x1*x2*p1", &c, t).unwrap());
        q.insert(2, parse_series("x2*p1*p2", &c, t).unwrap());
        q.insert(3, parse_series("x1*p1*p2", &c, t).unwrap());
        let mut w = vec![vec![rat(0); 4]; 4];
        for i in 0..2 {
            w[i][i + 2] = rat(1);
            w[i + 2][i] = rat(1);
        }
        QPStructure::new(&c, t, 1, w, q).unwrap()
    }

    #[test]
    fn poisson_linearization() {
        let s = poisson();
        assert!(validate_qp(&s).passed(), "{}", validate_qp(&s).render());
        let f = FormalExpMap::canonical(&s.chart, s.trunc);
        let t = s.trunc;
        let sym: Vec<Series> = ["y1", "y2", "0", "0"]
            .iter()
            .map(|v| parse_series(v, &s.chart, t).unwrap())
            .collect();
        let pkg = linearize_at_point(&s, &f, &sym).unwrap();
        assert!(pkg.report.passed(), "{}", pkg.report.render());
        // Q_x(ε^{x1}) = (y1 + ε^{x1})(y2 + ε^{x2}) ε^{p2}, so l_1(ε^{p2})^{x1} = −y1 y2
        let l1 = pkg.arity(1).find(|b| b.output == 0 && b.inputs == [3]).unwrap();
        assert_eq!(l1.coefficient.to_string(), "-y1 * y2");
        // numeric points agree with the symbolic run
        let num = linearize_at_point(&s, &f, &numeric_point(&s.chart, t, &[rat(2), rat(-3), rat(0), rat(0)])).unwrap();
        let l1n = num.arity(1).find(|b| b.output == 0 && b.inputs == [3]).unwrap();
        assert_eq!(l1n.coefficient, Series::constant(&num.chart, t, rat(6)));
        let origin = linearize_at_point(&s, &f, &numeric_point(&s.chart, t, &vec![rat(0); 4])).unwrap();
        assert!(origin.brackets.iter().all(|b| b.arity == 3));
    }

    #[test]
    fn rejects_non_body_point() {
        let s = poisson();
        let f = FormalExpMap::canonical(&s.chart, s.trunc);
        let bad = numeric_point(&s.chart, s.trunc, &[rat(0), rat(0), rat(1), rat(0)]);
        assert!(matches!(linearize_at_point(&s, &f, &bad), Err(Error::NotBodyPoint(_))));
    }
}
