//! Command-line interface: subcommand dispatch, report emission and exit codes.
//!
//! Exit code 0 means every check passed, 1 means a check failed or the computation
//! broke down, and 2 means a usage, input or parameter error.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use super::report::{Check, Report};
use super::suites::{run_suite, Suite};
use super::{generate_on, io, schwarzschild_static_pair, ChartSpec, ConformalSpec, DatasetManifest, Family};
use crate::asymptotics::{
    classify_kid, default_window, expansion_relations, fit_expansion, solve_aux_poisson_with, AuxConfig,
};
use crate::charges::{adm_charges, default_radii};
use crate::constraints::{dec_margin_on, dec_tolerance, dec_verdict, mass_current_on, sup_on, InitialDataSet};
use crate::deform::{strict_dec_deform, verify_deform_size, DeformConfig};
use crate::error::{Error, Result};
use crate::fields::{Field, Jet, Region};
use crate::hamiltonian::{hamiltonian_surface, hamiltonian_value, HamiltonianSpec};
use crate::linearized::{Asymptote, LapseShiftPair};

#[derive(Parser, Debug)]
#[command(
    name = "adm-toolkit",
    version,
    about = "Constraint, charge and deformation diagnostics for asymptotically flat initial data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// ADM energy and momentum from sphere fluxes.
    Charges(DataArgs),
    /// Sup norms of the mass density and current.
    Constraints(DataArgs),
    /// Dominant energy margin `mu - |J|` over the annulus.
    DecCheck(DataArgs),
    /// Expansion fit of a lapse-shift pair and its relations to the charges.
    KidFit(DataArgs),
    /// Strict dominant energy deformation of the data.
    Deform(DeformArgs),
    /// Volume and surface forms of the Hamiltonian.
    Hamiltonian(HamiltonianArgs),
    /// Built-in self-check suites.
    Verify(VerifyArgs),
    /// Writes a family dataset to a directory.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyName {
    Euclidean,
    Schwarzschild,
    BowenYork,
    Conformal,
    Perturbed,
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long, default_value = "json")]
    report: ReportFormat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the default tolerance of every check.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Dataset directory; excludes `--family`.
    #[arg(long, conflicts_with = "family")]
    input: Option<PathBuf>,
    #[arg(long)]
    family: Option<FamilyName>,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long)]
    m: Option<f64>,
    /// Bowen–York momentum, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    p: Option<Vec<f64>>,
    /// Conformal factor `1 + c r^-power`.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    power: Option<f64>,
    /// Base family of a perturbed dataset.
    #[arg(long)]
    base: Option<FamilyName>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    center: Option<Vec<f64>>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    r_inner: Option<f64>,
    #[arg(long)]
    r_outer: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, value_parser = ["2", "4"])]
    fd_order: Option<String>,
    /// Extraction radii, comma separated.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct DeformArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Centre of the Gaussian bump profile.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    bump_center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.8)]
    bump_width: f64,
    /// Writes the deformed data here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct HamiltonianArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    b: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4.0)]
    transition: f64,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    /// Runs every suite when omitted.
    #[arg(long)]
    suite: Option<Suite>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct GenerateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    output: PathBuf,
}

struct ChartDefaults {
    r_outer: f64,
    nodes: usize,
}

/// Loaded or generated data plus anything the manifest carried alongside it.
struct Loaded {
    ids: InitialDataSet,
    family: Family,
    extra: Vec<(String, Field)>,
}

fn family_from(name: FamilyName, a: &DataArgs, n: usize, top: bool) -> Result<Family> {
    Ok(match name {
        FamilyName::Euclidean => Family::Euclidean,
        FamilyName::Schwarzschild => Family::Schwarzschild { m: a.m.unwrap_or(1.0) },
        FamilyName::BowenYork => Family::BowenYork { p: a.p.clone().unwrap_or_else(|| vec![0.0, 0.0, 0.5]) },
        FamilyName::Conformal => {
            let d = ConformalSpec::default();
            Family::Conformal(ConformalSpec { c: a.c.unwrap_or(d.c), power: a.power.unwrap_or(d.power) })
        }
        FamilyName::Perturbed if top => {
            let base = a.base.unwrap_or(FamilyName::Euclidean);
            Family::Perturbed {
                base: Box::new(family_from(base, a, n, false)?),
                seed: a.common.seed,
                amplitude: a.amplitude.unwrap_or(0.05),
                center: a.center.clone().unwrap_or_else(|| {
                    let mut c = vec![0.0; n];
                    c[0] = 2.5;
                    c
                }),
                radius: a.radius.unwrap_or(1.0),
            }
        }
        FamilyName::Perturbed => return Err(Error::InvalidParameters("perturbed base must be an exact family".into())),
    })
}

fn chart_spec(a: &DataArgs, d: &ChartDefaults) -> ChartSpec {
    ChartSpec {
        r_inner: a.r_inner.unwrap_or(1.0),
        r_outer: a.r_outer.unwrap_or(d.r_outer),
        nodes: a.nodes.unwrap_or(d.nodes),
        fd_order: a.fd_order.as_deref().map_or(4, |s| s.parse().unwrap_or(4)),
    }
}

fn load_data(a: &DataArgs, d: &ChartDefaults) -> Result<Loaded> {
    if let Some(dir) = &a.input {
        let (ids, m) = io::load(dir)?;
        let (fields, _) = io::load_fields(dir)?;
        let extra = fields.into_iter().filter(|(k, _)| k != "g" && k != "pi").collect();
        return Ok(Loaded { ids, family: m.family, extra });
    }
    let name = a.family.ok_or_else(|| Error::InvalidParameters("one of --input or --family is required".into()))?;
    let family = family_from(name, a, a.n, true)?;
    let manifest = DatasetManifest::new(a.n, family.clone(), chart_spec(a, d));
    let chart = manifest.chart.build(a.n)?;
    let ids = generate_on(&chart, &family, manifest.type_params)?;
    Ok(Loaded { ids, family, extra: vec![] })
}

/// Analytic data are evaluated on the whole annulus; grid data keep a stencil width from the inner sphere.
fn data_region(ids: &InitialDataSet) -> Region {
    let c = &ids.chart;
    if ids.g.is_grid() || ids.pi.is_grid() {
        c.shell_region(c.r_inner + c.stencil_width(), c.r_outer)
    } else {
        c.annulus()
    }
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Known charges of a family, or `None` when no closed form applies.
fn expected_charges(family: &Family, n: usize) -> Option<(f64, Vec<f64>)> {
    let zero = vec![0.0; n];
    match family {
        Family::Euclidean => Some((0.0, zero)),
        Family::Schwarzschild { m } => Some((*m, zero)),
        Family::BowenYork { p } => Some((0.0, p.clone())),
        Family::Conformal(s) if s.power == (n - 2) as f64 => Some((2.0 * s.c, zero)),
        Family::Conformal(s) if s.power > (n - 2) as f64 => Some((0.0, zero)),
        Family::Perturbed { base, .. } => expected_charges(base, n),
        _ => None,
    }
}

fn charges(a: &DataArgs) -> Result<Report> {
    let data = load_data(a, &ChartDefaults { r_outer: 32.0, nodes: 129 })?;
    let ids = &data.ids;
    let radii = a.radii.clone().unwrap_or_else(|| default_radii(ids));
    let ch = adm_charges(ids, &radii)?;
    let mut checks = Vec::new();
    if let Some((e, p)) = expected_charges(&data.family, ids.n()) {
        let e_tol = a.common.tol.unwrap_or(if e == 0.0 { 1e-6 } else { 1e-3 });
        let p_tol = a.common.tol.unwrap_or(1e-6);
        checks.push(Check::at_most("energy_error", ch.e - e, e_tol));
        checks.push(Check::at_most("momentum_error", diff_norm(&ch.p, &p), p_tol));
    }
    Ok(Report::new("charges", checks, json!({ "family": data.family, "charges": ch })))
}

fn is_vacuum(family: &Family) -> bool {
    match family {
        Family::Euclidean | Family::Schwarzschild { .. } => true,
        Family::Perturbed { .. } | Family::External | Family::BowenYork { .. } | Family::Conformal(_) => false,
    }
}

/// Families whose momentum constraint holds identically.
fn is_divergence_free(family: &Family) -> bool {
    matches!(family, Family::Euclidean | Family::Schwarzschild { .. } | Family::BowenYork { .. } | Family::Conformal(_))
}

fn constraints(a: &DataArgs) -> Result<Report> {
    let data = load_data(a, &ChartDefaults { r_outer: 8.0, nodes: 65 })?;
    let ids = &data.ids;
    let region = data_region(ids);
    let mc = mass_current_on(ids, &region)?;
    let mu = sup_on(&mc.mu, 0, &region);
    let j = (0..ids.n()).map(|c| sup_on(&mc.j, c, &region)).fold(0.0, f64::max);
    let tol = a.common.tol.unwrap_or_else(|| dec_tolerance(&ids.chart));
    let mut checks = Vec::new();
    if is_vacuum(&data.family) {
        checks.push(Check::at_most("mass_density_sup", mu, tol));
    }
    if is_divergence_free(&data.family) {
        checks.push(Check::at_most("current_sup", j, tol));
    }
    let result = json!({ "family": data.family, "mu_sup": mu, "j_sup": j, "h": ids.chart.h, "nodes": region.len() });
    Ok(Report::new("constraints", checks, result))
}

fn dec_check(a: &DataArgs) -> Result<Report> {
    let data = load_data(a, &ChartDefaults { r_outer: 8.0, nodes: 65 })?;
    let ids = &data.ids;
    let region = data_region(ids);
    let margin = dec_margin_on(ids, &region)?;
    let tol = a.common.tol.unwrap_or_else(|| dec_tolerance(&ids.chart));
    let v = dec_verdict(&margin, &region, tol);
    let checks = vec![Check::at_least_minus("min_dec_margin", v.min_margin, tol)];
    Ok(Report::new("dec-check", checks, json!({ "family": data.family, "verdict": v })))
}

/// Lapse-shift pair from the dataset's `f` and `x` fields, or the static pair of a known family.
fn kid_pair(data: &Loaded) -> Result<LapseShiftPair> {
    let get = |k: &str| data.extra.iter().find(|(name, _)| name == k).map(|(_, f)| f.clone());
    if let (Some(f), Some(x)) = (get("f"), get("x")) {
        return Ok(LapseShiftPair::new(f, x));
    }
    let chart = &data.ids.chart;
    match &data.family {
        Family::Schwarzschild { m } => Ok(schwarzschild_static_pair(chart, *m)),
        Family::Euclidean => {
            let mut pair = LapseShiftPair::constant(chart, 1.0, &vec![0.0; chart.n]);
            pair.asymptote = Some(Asymptote { a: 1.0, b: vec![0.0; chart.n] });
            Ok(pair)
        }
        f => Err(Error::InvalidParameters(format!(
            "no known lapse-shift pair for {}; supply fields f and x with --input",
            f.name()
        ))),
    }
}

fn kid_fit(a: &DataArgs) -> Result<Report> {
    let data = load_data(a, &ChartDefaults { r_outer: 24.0, nodes: 97 })?;
    let ids = &data.ids;
    let n = ids.n();
    let window = a.radii.clone().unwrap_or_else(|| default_window(ids));
    let aux = solve_aux_poisson_with(ids, &AuxConfig { window: Some(window.clone()), ..AuxConfig::default() })?;
    let pair = kid_pair(&data)?;
    let fit = fit_expansion(&pair, ids, &aux, &window, None)?;
    let ch = adm_charges(ids, &window[window.len().saturating_sub(3.max(window.len() / 2))..])?;
    let tol = a.common.tol.unwrap_or(1e-2);
    let rel = expansion_relations(&fit, &ch, tol);
    let class = classify_kid(fit.a, &fit.b, &ch, 1e-3);
    let beta_want = 2.0 * (n as f64 - 1.0) / (n as f64 - 2.0) * ch.e;
    let mut checks = vec![
        Check::at_most("relation_max_defect", rel.max_defect(), tol),
        Check::at_most("classification_defect", class.defect(), tol),
    ];
    if ch.e.abs() > 1e-3 {
        checks.push(Check::at_most(
            "beta_relative_error",
            (aux.beta - beta_want) / beta_want,
            a.common.tol.unwrap_or(0.05),
        ));
    }
    let result = json!({
        "family": data.family,
        "fit": fit,
        "charges": ch,
        "relations": rel,
        "classification": class,
        "beta": aux.beta,
        "beta_expected": beta_want,
        "window": window,
    });
    Ok(Report::new("kid-fit", checks, result))
}

fn gaussian(ids: &InitialDataSet, centre: Vec<f64>, sigma: f64) -> Field {
    let n = ids.n();
    Field::scalar(&ids.chart, move |x: &[Jet]| {
        let mut s = Jet::constant(0.0);
        for a in 0..n {
            let d = x[a] - centre[a];
            s += d * d;
        }
        (s * (-1.0 / (sigma * sigma))).exp()
    })
}

fn deform(a: &DeformArgs) -> Result<Report> {
    let mut d = a.data.clone();
    d.family = d.family.or(if d.input.is_none() { Some(FamilyName::Euclidean) } else { None });
    let data = load_data(&d, &ChartDefaults { r_outer: 6.0, nodes: 25 })?;
    let ids = &data.ids;
    let n = ids.n();
    let centre = a.bump_center.clone().unwrap_or_else(|| vec![2.0; n]);
    if centre.len() != n || !(a.bump_width > 0.0) || !(a.lambda >= 0.0) {
        return Err(Error::InvalidParameters("bump needs an n-point centre, positive width and lambda >= 0".into()));
    }
    let cfg = DeformConfig::default();
    let out = strict_dec_deform(ids, a.lambda, &gaussian(ids, centre, a.bump_width), &cfg)?;
    let sol = &out.solution;
    let rep = &out.report;
    let size = verify_deform_size(sol, a.lambda)?;
    let tol = d.common.tol.unwrap_or(1e-6);
    let mut checks = vec![
        Check::at_most("constraint_residual_sup", sol.residual_sup, tol),
        Check::at_least_minus("min_margin", rep.min_margin, rep.tolerance),
        Check::at_most("newton_iterations", sol.newton_iters as f64, 10.0),
    ];
    if !rep.boundary_case {
        checks.push(Check::positive("min_margin_on_support", rep.min_on_support));
    }
    if let Some(dir) = &a.output {
        let mut m = DatasetManifest::new(n, Family::External, ids_chart_spec(ids));
        m.type_params = ids.type_params;
        io::save(&out.deformed, &m, dir)?;
    }
    let result = json!({
        "family": data.family,
        "margin": rep,
        "residual_history": sol.residual_history,
        "newton_iterations": sol.newton_iters,
        "krylov_iterations": sol.krylov_iters,
        "basis_coefficients": sol.coefficients,
        "size_over_lambda": size,
        "target_size": sol.target_size,
        "trust_radius": sol.trust_radius,
    });
    Ok(Report::new("deform", checks, result))
}

fn ids_chart_spec(ids: &InitialDataSet) -> ChartSpec {
    let c = &ids.chart;
    ChartSpec { r_inner: c.r_inner, r_outer: c.r_outer, nodes: c.nodes, fd_order: c.fd_order }
}

fn hamiltonian(a: &HamiltonianArgs) -> Result<Report> {
    let data = load_data(&a.data, &ChartDefaults { r_outer: 32.0, nodes: 33 })?;
    let ids = data.ids;
    let b = a.b.clone().unwrap_or_else(|| vec![0.0; ids.n()]);
    if b.len() != ids.n() {
        return Err(Error::InvalidParameters(format!("--b needs {} entries", ids.n())));
    }
    let mut spec = HamiltonianSpec::new(ids.clone(), a.a, &b, a.transition)?;
    if let Some(r) = &a.data.radii {
        spec.radii = r.clone();
    }
    let vol = hamiltonian_value(&spec, (&ids.g, &ids.pi))?;
    let surf = hamiltonian_surface(&spec, &ids)?;
    let tol = a.data.common.tol.unwrap_or(0.02);
    let scale = vol.value.abs().max(surf.value.abs()).max(1.0);
    let mut checks = vec![Check::at_most("volume_minus_surface", vol.value - surf.value, tol * scale)];
    if let (Some((e, p)), 3) = (expected_charges(&data.family, 3), ids.n()) {
        let want = 2.0 * 8.0 * PI * (a.a * e) + 8.0 * PI * b.iter().zip(&p).map(|(u, v)| u * v).sum::<f64>();
        checks.push(Check::at_most("volume_minus_charges", vol.value - want, tol * want.abs().max(1.0)));
    }
    let result = json!({ "family": data.family, "volume": vol, "surface": surf, "a": a.a, "b": b });
    Ok(Report::new("hamiltonian", checks, result))
}

fn verify(a: &VerifyArgs) -> Result<Report> {
    let suites: Vec<Suite> = match a.suite {
        Some(s) => vec![s],
        None => Suite::value_variants().to_vec(),
    };
    let mut checks = Vec::new();
    for s in &suites {
        let name = s.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
        for mut c in run_suite(*s, a.common.seed)? {
            if let Some(t) = a.common.tol {
                c = Check { pass: c.value.abs() <= t, tolerance: t, ..c };
            }
            c.name = format!("{name}/{}", c.name);
            checks.push(c);
        }
    }
    Ok(Report::new("verify", checks, json!({ "suites": suites, "seed": a.common.seed })))
}

fn generate(a: &GenerateArgs) -> Result<Report> {
    let data = load_data(&a.data, &ChartDefaults { r_outer: 8.0, nodes: 65 })?;
    let ids = &data.ids;
    let mut m = DatasetManifest::new(ids.n(), data.family.clone(), ids_chart_spec(ids));
    m.type_params = ids.type_params;
    let mut fields: Vec<(&str, &Field)> = vec![("g", &ids.g), ("pi", &ids.pi)];
    let pair = match &data.family {
        Family::Schwarzschild { m } => Some(schwarzschild_static_pair(&ids.chart, *m)),
        _ => None,
    };
    if let Some(p) = &pair {
        fields.push(("f", &p.f));
        fields.push(("x", &p.x));
    }
    let saved = io::save_fields(&fields, &m, &a.output)?;
    Ok(Report::new("generate", vec![], json!({ "output": a.output, "manifest": saved })))
}

/// Usage, input and parameter errors exit with 2; numerical failures with 1.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_)
        | Error::ManifestMismatch(_)
        | Error::ConventionNotPaper(_)
        | Error::InvalidParameters(_)
        | Error::UnsupportedDimensionForFamily { .. }
        | Error::UnsupportedDimension { .. }
        | Error::InvalidDimension(_)
        | Error::InvalidRadii { .. }
        | Error::InsufficientResolution { .. }
        | Error::InvalidTransitionRadius(_)
        | Error::RadiusOutOfChart { .. }
        | Error::TooFewRadii { .. }
        | Error::WindowTooSmall(_) => 2,
        _ => 1,
    }
}

fn emit(report: &Report, format: ReportFormat, out: &mut dyn Write, err: &mut dyn Write) {
    match format {
        ReportFormat::Json => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(report).unwrap_or_default());
            let _ = write!(err, "{}", report.summary());
        }
        ReportFormat::Text => {
            let _ = write!(out, "{}", report.summary());
        }
    }
}

fn format_of(c: &Command) -> ReportFormat {
    match c {
        Command::Charges(a) | Command::Constraints(a) | Command::DecCheck(a) | Command::KidFit(a) => a.common.report,
        Command::Deform(a) => a.data.common.report,
        Command::Hamiltonian(a) => a.data.common.report,
        Command::Generate(a) => a.data.common.report,
        Command::Verify(a) => a.common.report,
    }
}

fn name_of(c: &Command) -> &'static str {
    match c {
        Command::Charges(_) => "charges",
        Command::Constraints(_) => "constraints",
        Command::DecCheck(_) => "dec-check",
        Command::KidFit(_) => "kid-fit",
        Command::Deform(_) => "deform",
        Command::Hamiltonian(_) => "hamiltonian",
        Command::Verify(_) => "verify",
        Command::Generate(_) => "generate",
    }
}

/// Parses `argv` (program name first), runs the command and writes the report.
/// Returns the process exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 2;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    let res = match &cli.command {
        Command::Charges(a) => charges(a),
        Command::Constraints(a) => constraints(a),
        Command::DecCheck(a) => dec_check(a),
        Command::KidFit(a) => kid_fit(a),
        Command::Deform(a) => deform(a),
        Command::Hamiltonian(a) => hamiltonian(a),
        Command::Verify(a) => verify(a),
        Command::Generate(a) => generate(a),
    };
    let format = format_of(&cli.command);
    match res {
        Ok(report) => {
            emit(&report, format, out, err);
            if report.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let mut report = Report::new(name_of(&cli.command), vec![], json!({ "error": e.to_string() }));
            report.pass = false;
            emit(&report, format, out, err);
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point used by the binary; honours `ADM_TOOLKIT_THREADS`.
pub fn run() -> i32 {
    if let Some(t) = std::env::var("ADM_TOOLKIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
