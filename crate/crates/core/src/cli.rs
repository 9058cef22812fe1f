//! Command-line surface. Each command reads one session, prints a report
//! and optionally writes an artifact.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::algebra::{Monomial, RingMorphism, Series, Trunc};
use crate::connection::{
    connection_from_fexp, connection_from_grothendieck, fexp_jets_at, geodesic_taylor_oracle, hpt_complete,
    nabla_superconnection, VPoly,
};
use crate::derivation::Derivation;
use crate::error::{Error, Result};
use crate::fexp::{
    apply_fibre_change, canonicalize, fexp_from_grothendieck, flatness_report, grothendieck_from_fexp, transfer_diffeo,
    validate_fexp, FormalExpMap, GrothendieckConnection,
};
use crate::qp::{linearize_at_point, validate_qp};
use crate::report::{Check, Report};
use crate::resolution::{check_homotopy, cohomology_lift, find_primitive, HomotopyData};
use crate::session::{self, Session, SessionFile};
use clap::{Parser, Subcommand};

const EXIT_CODES: &str = "\
Exit status:
  0  every identity checked holds
  1  the command ran and the report lists violations
  2  input error: unreadable file, malformed JSON or series, missing block,
     or input that fails a precondition of the command
  3  internal error: an identity the engine solved for did not hold";

#[derive(Debug, Parser)]
#[command(name = "fexp", version, about = "Formal exponential maps on graded manifolds", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Session file (JSON).
    #[arg(long, global = true)]
    pub session: Option<PathBuf>,
    /// Resolution order N, overriding the session.
    #[arg(long, global = true)]
    pub order: Option<u32>,
    /// Form order, overriding the session.
    #[arg(long = "form-order", global = true)]
    pub form_order: Option<u32>,
    /// Where to write the produced artifact; printed after the report otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every block present in the session.
    Validate,
    /// Grothendieck connection of the `fexp` block.
    GFromF,
    /// Formal exponential map of the `derivation` block.
    FFromG,
    /// D² = 0 for the `derivation` block (or the connection of `fexp`).
    Flatness,
    /// Fibre change making `fexp` canonical.
    Canonicalize,
    /// Transfer `fexp` and its connection along the `diffeo` block.
    Transfer,
    /// D-closed lift of the base function in `element`.
    Lift,
    /// Primitive of the D-exact `element`.
    Primitive,
    /// Contraction and homotopy identities on generators and `samples`.
    CheckHomotopy,
    /// Flat completion of the `connection` block.
    Hpt,
    /// Torsion-free connection of a proper `fexp` or of `derivation`.
    ExtractConnection,
    /// Geodesic Taylor coefficients at `point`, compared with the map's jets.
    GeodesicOracle {
        /// Highest Taylor order.
        #[arg(long, default_value_t = 4)]
        jets: usize,
    },
    /// L∞ brackets of the `qp` block at `point`.
    Linearize {
        /// Take the `qp` block from this file.
        #[arg(long)]
        qp: Option<PathBuf>,
        /// Take the `fexp` block from this file (canonical map if absent).
        #[arg(long)]
        fexp: Option<PathBuf>,
        /// Take the `point` block from this file (origin if absent).
        #[arg(long)]
        point: Option<PathBuf>,
    },
}

/// Report plus optional artifact text.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub artifact: Option<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.report.passed())
    }
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Assertion(_) => 3,
        _ => 2,
    }
}

fn read_file(path: &Path) -> Result<SessionFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: format!("{}: {e}", path.display()),
    })
}

fn trunc_for(cli: &Cli, file: &SessionFile) -> Option<Trunc> {
    if cli.order.is_none() && cli.form_order.is_none() {
        return None;
    }
    let base = file.trunc.unwrap_or_default();
    Some(Trunc::new(
        cli.order.unwrap_or(base.res),
        cli.form_order.unwrap_or(base.form),
    ))
}

fn need<'a, T>(x: &'a Option<T>, block: &str) -> Result<&'a T> {
    x.as_ref().ok_or_else(|| Error::MissingBlock(block.into()))
}

/// The `derivation` block as a Grothendieck connection, or the connection
/// of the `fexp` block.
fn connection_of(s: &Session) -> Result<GrothendieckConnection> {
    match (&s.derivation, &s.fexp) {
        (Some(d), _) => GrothendieckConnection::new(d.clone()),
        (None, Some(f)) => grothendieck_from_fexp(f),
        (None, None) => Err(Error::MissingBlock("derivation or fexp".into())),
    }
}

fn artifact(file: &SessionFile) -> Option<String> {
    Some(session::serialize(file))
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let path = cli
        .session
        .as_ref()
        .ok_or_else(|| Error::Io("--session is required".into()))?;
    let mut file = read_file(path)?;
    if let Command::Linearize { qp, fexp, point } = &cli.command {
        if let Some(p) = qp {
            file.qp = read_file(p)?.qp;
        }
        if let Some(p) = fexp {
            file.fexp = read_file(p)?.fexp;
        }
        if let Some(p) = point {
            file.point = read_file(p)?.point;
        }
    }
    let trunc = trunc_for(cli, &file);
    let s = session::from_file(&file, trunc)?;
    run_command(&cli.command, &s)
}

pub fn run_command(cmd: &Command, s: &Session) -> Result<Outcome> {
    let chart = &s.chart;
    let t = s.trunc;
    let mut out = session::header(chart, t);
    let outcome = match cmd {
        Command::Validate => Outcome {
            report: validate(s),
            artifact: None,
        },
        Command::GFromF => {
            let f = need(&s.fexp, "fexp")?;
            let g = grothendieck_from_fexp(f)?;
            let mut report = Report::new("Grothendieck connection from formal exponential map");
            let mut c = Check::new("D(fexp* z^a) = 0");
            for (a, p) in f.pullbacks().iter().enumerate() {
                c.residual(
                    chart.generator(chart.base(a)).name.clone(),
                    g.derivation().apply(p).up_to_resdeg(t.res - 1),
                );
            }
            report.push(c);
            report.merge(flatness_report(&g));
            report.fact("proper", f.is_proper());
            out.derivation = Some(session::derivation_block(g.derivation()));
            Outcome {
                report,
                artifact: artifact(&out),
            }
        }
        Command::FFromG => {
            let g = connection_of(s)?;
            let f = fexp_from_grothendieck(&g)?;
            let mut report = validate_fexp(&f);
            report.merge(flatness_report(&g));
            out.fexp = Some(session::fexp_block(&f));
            Outcome {
                report,
                artifact: artifact(&out),
            }
        }
        Command::Flatness => Outcome {
            report: flatness_report(&connection_of(s)?),
            artifact: None,
        },
        Command::Canonicalize => {
            let f = need(&s.fexp, "fexp")?;
            let rho = canonicalize(f)?;
            let fc = apply_fibre_change(f, &rho)?;
            let mut report = Report::new("canonicalization");
            let mut c = Check::new("rho* fexp* z^a = z^a + e^a");
            let canonical = FormalExpMap::canonical(chart, t);
            for a in 0..chart.n_base() {
                c.residual(
                    chart.generator(chart.base(a)).name.clone(),
                    fc.pullback(a) - canonical.pullback(a),
                );
            }
            report.push(c);
            report.fact("proper", f.is_proper());
            let images: Vec<Series> = (0..chart.n_base()).map(|a| rho.image(chart.fiber(a)).clone()).collect();
            out.fexp = Some(session::fexp_block(&fc));
            out.fibre_change = Some(session::fibre_change_block(chart, &images));
            Outcome {
                report,
                artifact: artifact(&out),
            }
        }
        Command::Transfer => {
            let f = need(&s.fexp, "fexp")?;
            let phi = need(&s.diffeo, "diffeo")?;
            let g = connection_of(s)?;
            let (fb, gb) = transfer_diffeo(f, &g, phi)?;
            let mut report = Report::new("transfer along a diffeomorphism");
            let rebuilt = grothendieck_from_fexp(&fb)?;
            let mut c = Check::new("connection of transferred map = transferred connection");
            let top = t.res - 1;
            for idx in 0..chart.len() {
                let r =
                    &rebuilt.derivation().image(idx).up_to_resdeg(top) - &gb.derivation().image(idx).up_to_resdeg(top);
                c.residual(chart.generator(idx).name.clone(), r);
            }
            report.push(c);
            report.merge(validate_fexp(&fb));
            out.fexp = Some(session::fexp_block(&fb));
            out.derivation = Some(session::derivation_block(gb.derivation()));
            Outcome {
                report,
                artifact: artifact(&out),
            }
        }
        Command::Lift => {
            let base = need(&s.element, "element")?;
            let g = connection_of(s)?;
            let h = HomotopyData::from_connection(&g)?;
            let lifted = cohomology_lift(&g, &h, base)?;
            let mut report = Report::new("cohomology lift");
            let mut c = Check::new("D f = 0");
            c.residual("f", g.derivation().apply(&lifted).up_to_resdeg(t.res - 1));
            report.push(c);
            if let (Some(f), None) = (&s.fexp, &s.derivation) {
                let mut c = Check::new("f = fexp* g");
                c.residual("f", &lifted - &f.pullback_morphism()?.apply(base)?);
                report.push(c);
            }
            out.element = Some(session::element_repr(&lifted));
            Outcome {
                report,
                artifact: artifact(&out),
            }
        }
        Command::Primitive => {
            let f = need(&s.element, "element")?;
            let g = connection_of(s)?;
            let h = HomotopyData::from_connection(&g)?;
            let p = find_primitive(&g, &h, f)?;
            let mut report = Report::new("primitive");
            let mut c = Check::new("D p = f");
            c.residual("p", (&g.derivation().apply(&p) - f).up_to_resdeg(t.res - 1));
            report.push(c);
            out.element = Some(session::element_repr(&p));
            Outcome {
                report,
                artifact: artifact(&out),
            }
        }
        Command::CheckHomotopy => {
            let g = connection_of(s)?;
            let h = HomotopyData::from_connection(&g)?;
            let samples: Vec<Series> = match &s.samples {
                Some(v) => v.clone(),
                None => (0..chart.len()).map(|i| Series::generator(chart, t, i)).collect(),
            };
            Outcome {
                report: check_homotopy(&h, &samples),
                artifact: None,
            }
        }
        Command::Hpt => {
            let conn = need(&s.connection, "connection")?;
            let res = hpt_complete(conn)?;
            let mut report = res.report;
            for step in &res.steps {
                report.fact(format!("step{}_weight", step.k), step.weight);
            }
            out.derivation = Some(session::derivation_block(res.connection.derivation()));
            Outcome {
                report,
                artifact: artifact(&out),
            }
        }
        Command::ExtractConnection => {
            let conn = match (&s.derivation, &s.fexp) {
                (Some(d), _) => connection_from_grothendieck(&GrothendieckConnection::new(d.clone())?)?,
                (None, Some(f)) => connection_from_fexp(f)?,
                (None, None) => return Err(Error::MissingBlock("derivation or fexp".into())),
            };
            let mut report = Report::new("connection extraction");
            let mut c = Check::new("[D_-1, D_0^2] = 0");
            bianchi(&conn_superconnection_check(&conn), &mut c);
            report.push(c);
            out.connection = Some(session::connection_block(&conn));
            Outcome {
                report,
                artifact: artifact(&out),
            }
        }
        Command::GeodesicOracle { jets } => geodesic(s, *jets)?,
        Command::Linearize { .. } => {
            let qp = need(&s.qp, "qp")?;
            let f = s.fexp.clone().unwrap_or_else(|| FormalExpMap::canonical(chart, t));
            let point = s
                .point
                .clone()
                .unwrap_or_else(|| vec![Series::zero(chart, t); chart.n_base()]);
            let pkg = linearize_at_point(qp, &f, &point)?;
            let mut report = pkg.report.clone();
            report.title = "L-infinity linearization".into();
            Outcome {
                report,
                artifact: Some(pkg.bracket_table()),
            }
        }
    };
    Ok(outcome)
}

fn conn_superconnection_check(conn: &crate::connection::Connection) -> Derivation {
    let d0 = nabla_superconnection(conn);
    let delta = Derivation::canonical_delta(conn.chart(), conn.trunc());
    delta.commutator(&d0.square()).expect("same chart")
}

fn bianchi(d: &Derivation, c: &mut Check) {
    for (&idx, img) in d.images() {
        c.residual(d.chart().generator(idx).name.clone(), img.clone());
    }
}

fn validate(s: &Session) -> Report {
    let mut report = Report::new("session validation");
    report.fact("generators", s.chart.len());
    report.fact("body_dim", s.chart.body_dim());
    if let Some(f) = &s.fexp {
        report.merge(validate_fexp(f));
    }
    if let Some(d) = &s.derivation {
        match GrothendieckConnection::new(d.clone()) {
            Ok(g) => report.merge(flatness_report(&g)),
            Err(e) => {
                let mut c = Check::new("derivation is a Grothendieck connection");
                c.fail(e.to_string());
                report.push(c);
            }
        }
    }
    if let Some(conn) = &s.connection {
        let mut c = Check::new("[D_-1, D_0^2] = 0");
        bianchi(&conn_superconnection_check(conn), &mut c);
        report.push(c);
        let mut c = Check::new("[D_-1, D_0] = 0");
        let d0 = nabla_superconnection(conn);
        bianchi(
            &Derivation::canonical_delta(&s.chart, s.trunc)
                .commutator(&d0)
                .expect("same chart"),
            &mut c,
        );
        report.push(c);
    }
    if let Some(qp) = &s.qp {
        report.merge(validate_qp(qp));
    }
    report
}

fn vpoly_series(s: &Session, p: &VPoly) -> Series {
    let chart = &s.chart;
    let mut out = Series::zero(chart, s.trunc);
    for (e, c) in &p.terms {
        let mut exps = vec![0u16; chart.len()];
        for (b, &x) in e.iter().enumerate() {
            exps[chart.fiber(b)] = x as u16;
        }
        out = &out + &Series::monomial(chart, s.trunc, Monomial::from_exponents(exps), c.clone());
    }
    out
}

fn geodesic(s: &Session, jets: usize) -> Result<Outcome> {
    let chart = &s.chart;
    let conn = need(&s.connection, "connection")?;
    let point = need(&s.point, "point")?;
    if jets > s.trunc.res as usize {
        return Err(Error::Semantic {
            block: "point".into(),
            message: format!("jet order {jets} exceeds the resolution order {}", s.trunc.res),
        });
    }
    let x = point
        .iter()
        .map(|v| {
            if v.terms().all(|(m, _)| m.is_one()) {
                Ok(v.constant_term())
            } else {
                Err(Error::Semantic {
                    block: "point".into(),
                    message: "geodesics need a numeric point".into(),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let oracle = geodesic_taylor_oracle(conn, &x, jets)?;
    let f = match &s.fexp {
        Some(f) => f.clone(),
        None => fexp_from_grothendieck(&hpt_complete(conn)?.connection)?,
    };
    let engine = fexp_jets_at(&f, &x)?;
    let mut report = Report::new("geodesic cross-validation");
    let mut c = Check::new(format!("fexp jets = geodesic Taylor coefficients through order {jets}"));
    let mut table = String::new();
    for a in 0..chart.n_base() {
        let name = &chart.generator(chart.base(a)).name;
        for n in 0..=jets {
            let o = vpoly_series(s, &oracle[a][n]);
            let e = vpoly_series(s, &engine[a][n]);
            c.residual(format!("{name} order {n}"), &e - &o);
            let _ = writeln!(table, "{name} {n} {o}");
        }
    }
    report.push(c);
    let subs = (0..chart.n_base())
        .map(|i| (chart.base(i), Series::constant(chart, s.trunc, x[i].clone())))
        .collect();
    let at_x = RingMorphism::with_images(chart, s.trunc, &subs)?;
    let mut second = Check::new("order 2 = -1/2 A^a_bc(x) v^b v^c");
    for a in 0..chart.n_base() {
        if jets < 2 {
            break;
        }
        let mut expect = Series::zero(chart, s.trunc);
        for ((a2, b, cc), sym) in conn.symbols() {
            if *a2 != a {
                continue;
            }
            let val = at_x.apply(sym)?;
            let v = &Series::generator(chart, s.trunc, chart.fiber(*b))
                * &Series::generator(chart, s.trunc, chart.fiber(*cc));
            expect = &expect + &(&v * &val).scale(&num_rational::BigRational::new((-1).into(), 2.into()));
        }
        let name = chart.generator(chart.base(a)).name.clone();
        second.residual(format!("{name} oracle"), &vpoly_series(s, &oracle[a][2]) - &expect);
        second.residual(format!("{name} fexp"), &vpoly_series(s, &engine[a][2]) - &expect);
    }
    report.push(second);
    report.fact(
        "point",
        x.iter()
            .map(crate::algebra::format_rational)
            .collect::<Vec<_>>()
            .join(","),
    );
    Ok(Outcome {
        report,
        artifact: Some(table),
    })
}

/// Runs the CLI and returns the process exit status.
pub fn main_with(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.report.render());
            if let Some(text) = &outcome.artifact {
                match &cli.out {
                    Some(path) => {
                        if let Err(e) = std::fs::write(path, text) {
                            eprintln!("error: {}: {e}", path.display());
                            return 2;
                        }
                    }
                    None => {
                        println!("==");
                        print!("{text}");
                    }
                }
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
