//! Command dispatch and report assembly.

use std::path::{Path, PathBuf};

use hyperstab_core::envelope::{
    audit_certificate, check_certificates, check_p_triangle, envelope_norm, theta, CertificateAudit, CertificateReport,
    EnvelopeResult, PTriangleReport,
};
use hyperstab_core::fixedpoint::{iterate, FixedPointReport};
use hyperstab_core::hyperstab::{run_experiment, HyperstabReport};
use hyperstab_core::radical::{
    check_structure, make_solution, quadratic_residual, random_pairs, residual_grid, residual_with_scale,
    EquationParams, ResidualSample, StructureReport,
};
use hyperstab_core::scalar::real_root;
use hyperstab_core::spaces::{check_axioms, eval_norm, AxiomReport, AxiomTally, Witness};
use hyperstab_core::{Error, SpaceDescriptor, Vector, VectorFunction};
use serde::Serialize;

use crate::config::{
    CheckSpacePayload, Command, EnvelopePayload, FixedPointPayload, Format, Payload, RunConfig, SolvePayload,
};
use crate::output::{emit_csv, indexed, real, write_atomic, Table};
use crate::CliError;

/// Slack on the fixed-point bound `‖φ − ψ, y‖^θ ≤ ε*`.
pub const FIXED_POINT_SLACK: f64 = 1e-6;
/// Relative tolerance for the SOLVE pair checks and structure laws.
pub const SOLVE_TOL: f64 = 1e-9;
pub const LAW_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct ViolationEntry {
    pub axiom: &'static str,
    pub count: u64,
    pub worst: Option<Witness<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSpaceReport {
    pub space: SpaceDescriptor<f64>,
    pub axioms: AxiomReport<f64>,
    pub violations: Vec<ViolationEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeEval {
    pub x: Vector<f64>,
    pub z: Vector<f64>,
    pub norm: f64,
    pub envelope: EnvelopeResult<f64>,
    pub audit: CertificateAudit<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub space: SpaceDescriptor<f64>,
    pub theta: f64,
    pub certificates: CertificateReport<f64>,
    pub p_triangle: PTriangleReport<f64>,
    pub points: Vec<EnvelopeEval>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPointRun {
    pub samples: Vec<f64>,
    pub result: FixedPointReport<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairCheck {
    pub pairs: usize,
    /// Largest `‖residual‖∞ / term scale`.
    pub sup_ratio: f64,
    pub worst: Option<(f64, f64)>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub equation: EquationParams<f64>,
    pub solution: Option<VectorFunction<f64>>,
    pub failed_constraints: Vec<String>,
    pub structure: Option<StructureReport<f64>>,
    pub residual: Option<PairCheck>,
    /// `g = f ∘ ∛` against the additive-argument equation at `(x³, y³)`.
    pub correspondence: Option<PairCheck>,
    pub residual_grid: Vec<ResidualSample<f64>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Report {
    CheckSpace(CheckSpaceReport),
    Envelope(EnvelopeReport),
    FixedPoint(FixedPointRun),
    Solve(SolveReport),
    Hyperstab(HyperstabReport<f64>),
}

/// Contents of `report.json`. Holds nothing that varies between runs of
/// the same config.
#[derive(Debug, Clone, Serialize)]
pub struct ReportFile {
    pub command: Command,
    pub seed: u64,
    pub passed: bool,
    pub report: Report,
}

#[derive(Debug, Clone, Serialize)]
struct Metadata<'a> {
    timestamp: String,
    version: &'static str,
    command: Command,
    seed: u64,
    threads: usize,
    exit_code: i32,
    files: &'a [PathBuf],
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub passed: bool,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            2
        }
    }
}

fn check_space(p: &CheckSpacePayload, seed: u64) -> Result<(bool, Report), CliError> {
    let axioms = check_axioms(&p.space, p.trials, seed)?;
    let tallies: [(&'static str, &AxiomTally<f64>); 4] =
        [("B1", &axioms.b1), ("B2", &axioms.b2), ("B3", &axioms.b3), ("B4", &axioms.b4)];
    let violations: Vec<ViolationEntry> = tallies
        .iter()
        .filter(|(_, t)| t.violations > 0)
        .map(|(name, t)| ViolationEntry {
            axiom: name,
            count: t.violations,
            worst: t.worst.clone(),
        })
        .collect();
    Ok((
        violations.is_empty(),
        Report::CheckSpace(CheckSpaceReport {
            space: p.space.clone(),
            axioms,
            violations,
        }),
    ))
}

fn envelope(p: &EnvelopePayload, seed: u64) -> Result<(bool, Report), CliError> {
    let th = theta(p.space.beta, p.space.kappa)?;
    let certificates = check_certificates(&p.space, p.samples, p.budget, seed)?;
    let p_triangle = check_p_triangle(&p.space, p.trials, seed.wrapping_add(1))?;
    let points = p
        .points
        .iter()
        .enumerate()
        .map(|(i, pt)| {
            let e = envelope_norm(&p.space, &pt.x, &pt.z, p.budget, seed.wrapping_add(2 + i as u64))?;
            Ok(EnvelopeEval {
                x: pt.x.clone(),
                z: pt.z.clone(),
                norm: eval_norm(&p.space, &pt.x, &pt.z)?,
                audit: audit_certificate(&p.space, &pt.x, &pt.z, &e)?,
                envelope: e,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let passed = certificates.invalid == 0 && p_triangle.violations == 0 && points.iter().all(|e| e.audit.valid);
    Ok((
        passed,
        Report::Envelope(EnvelopeReport {
            space: p.space.clone(),
            theta: th,
            certificates,
            p_triangle,
            points,
        }),
    ))
}

/// One real per line; blank lines are skipped.
pub fn read_samples_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0).map(str::trim).filter(|f| !f.is_empty()) else {
            continue;
        };
        let v: f64 = field.parse().map_err(|_| {
            CliError::Config(format!("{}: line {}: not a real: {field:?}", path.display(), line + 1))
        })?;
        out.push(v);
    }
    Ok(out)
}

fn fixed_point(p: &FixedPointPayload) -> Result<(bool, Report), CliError> {
    let mut samples = p.samples.clone();
    if let Some(path) = &p.samples_csv {
        samples.extend(read_samples_csv(path)?);
    }
    let r = iterate(&p.spec, &p.phi, &p.epsilon, &samples, &p.witnesses, p.tol, p.n_max)?;
    let passed = r.converged
        && r.eps_star_converged
        && r.hypothesis_ratio <= 1.0 + FIXED_POINT_SLACK
        && r.k_observed <= 1.0 + FIXED_POINT_SLACK;
    Ok((passed, Report::FixedPoint(FixedPointRun { samples, result: r })))
}

fn pair_check(
    pairs: &[(f64, f64)],
    mut ratio: impl FnMut(f64, f64) -> Result<f64, Error>,
) -> Result<PairCheck, Error> {
    let mut sup_ratio = 0.0;
    let mut worst = None;
    for &(x, y) in pairs {
        let r = ratio(x, y)?;
        if r > sup_ratio || r.is_nan() {
            sup_ratio = r;
            worst = Some((x, y));
        }
    }
    Ok(PairCheck {
        pairs: pairs.len(),
        sup_ratio,
        worst,
        passed: sup_ratio <= SOLVE_TOL,
    })
}

fn scaled(r: &Vector<f64>, scale: f64) -> f64 {
    if scale > 0.0 {
        r.norm_inf() / scale
    } else {
        r.norm_inf()
    }
}

fn solve(p: &SolvePayload, seed: u64) -> Result<(bool, Report), CliError> {
    let eq = &p.equation;
    let w = p.solution.w.clone().unwrap_or_else(|| Vector::zeros(p.dim));
    let dir = p
        .solution
        .direction
        .clone()
        .unwrap_or_else(|| Vector::basis(p.dim, p.dim - 1));
    let f = match make_solution(eq, p.solution.theta, &w, &dir) {
        Ok(f) => f,
        Err(Error::NoExactSolution { failed }) => {
            return Ok((
                false,
                Report::Solve(SolveReport {
                    equation: *eq,
                    solution: None,
                    failed_constraints: failed,
                    structure: None,
                    residual: None,
                    correspondence: None,
                    residual_grid: Vec::new(),
                }),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let structure = check_structure(eq, &f, &p.grid, LAW_TOL)?;
    let [lo, hi] = p.range;
    let pairs: Vec<(f64, f64)> = random_pairs(eq, p.pairs, lo, hi, seed);
    let residual = pair_check(&pairs, |x, y| {
        let (r, s) = residual_with_scale(eq, &f, x, y)?;
        Ok(scaled(&r, s))
    })?;
    let g = |t: f64| f.eval(real_root(t, eq.root_n));
    let correspondence = pair_check(&pairs, |x, y| {
        let n = eq.root_n as i32;
        let (r, s) = quadratic_residual(eq, &g, x.powi(n), y.powi(n))?;
        Ok(scaled(&r, s))
    })?;
    let grid = residual_grid(eq, &f, p.dim, &p.grid, &p.grid, None)?;
    let passed = structure.passed && residual.passed && correspondence.passed;
    Ok((
        passed,
        Report::Solve(SolveReport {
            equation: *eq,
            solution: Some(f),
            failed_constraints: Vec::new(),
            structure: Some(structure),
            residual: Some(residual),
            correspondence: Some(correspondence),
            residual_grid: grid,
        }),
    ))
}

/// Runs the computation without touching the file system.
pub fn compute(cfg: &RunConfig) -> Result<ReportFile, CliError> {
    let seed = cfg.effective_seed();
    let (passed, report) = match &cfg.payload {
        Payload::CheckSpace(p) => check_space(p, seed)?,
        Payload::Envelope(p) => envelope(p, seed)?,
        Payload::FixedPoint(p) => fixed_point(p)?,
        Payload::Solve(p) => solve(p, seed)?,
        Payload::Hyperstab(p) => {
            let mut p = p.clone();
            p.seed = seed;
            let r = run_experiment(&p)?;
            (r.all_checks_passed, Report::Hyperstab(r))
        }
    };
    Ok(ReportFile {
        command: cfg.command(),
        seed,
        passed,
        report,
    })
}

fn witness_cells(w: &Option<Witness<f64>>) -> [String; 2] {
    match w {
        Some(w) => [real(w.ratio), real(w.severity)],
        None => [String::new(), String::new()],
    }
}

fn vector_cells(v: &Vector<f64>) -> impl Iterator<Item = String> + '_ {
    v.coords().iter().map(|&c| real(c))
}

impl ReportFile {
    pub fn warnings(&self) -> &[String] {
        match &self.report {
            Report::Hyperstab(r) => &r.warnings,
            _ => &[],
        }
    }

    /// Tabular sections, one table per CSV file.
    pub fn tables(&self) -> Vec<Table> {
        match &self.report {
            Report::CheckSpace(r) => {
                let mut t = Table::new("axioms", ["axiom", "checks", "violations", "worst_ratio", "worst_severity"]);
                for (name, a) in [("B1", &r.axioms.b1), ("B2", &r.axioms.b2), ("B3", &r.axioms.b3), ("B4", &r.axioms.b4)] {
                    let mut row = vec![name.to_string(), a.checks.to_string(), a.violations.to_string()];
                    row.extend(witness_cells(&a.worst));
                    t.push(row);
                }
                vec![t]
            }
            Report::Envelope(r) => {
                let dim = r.space.dim;
                let mut header = indexed("x", dim);
                header.extend(indexed("z", dim));
                header.extend(["norm", "value", "parts", "ratio_to_norm", "valid"].map(String::from));
                let mut t = Table::new("envelope", header);
                for e in &r.points {
                    let mut row: Vec<String> = vector_cells(&e.x).chain(vector_cells(&e.z)).collect();
                    row.extend([
                        real(e.norm),
                        real(e.envelope.value),
                        e.envelope.certificate.len().to_string(),
                        real(e.audit.ratio_to_norm),
                        e.audit.valid.to_string(),
                    ]);
                    t.push(row);
                }
                vec![t]
            }
            Report::FixedPoint(r) => {
                let dim = r.result.psi.dim();
                let mut header = vec!["x".to_string()];
                header.extend(indexed("psi", dim));
                let mut psi = Table::new("psi", header);
                for v in &r.result.psi_values {
                    let mut row = vec![real(v.x)];
                    row.extend(vector_cells(&v.value));
                    psi.push(row);
                }
                let mut bounds = Table::new("bounds", ["x", "witness", "eps_star", "deviation", "bound"]);
                for b in &r.result.bound_values {
                    bounds.push(vec![
                        real(b.x),
                        b.witness.to_string(),
                        real(b.eps_star),
                        real(b.deviation),
                        real(b.bound),
                    ]);
                }
                let mut steps = Table::new("steps", ["n", "step"]);
                for (n, s) in r.result.steps.iter().enumerate() {
                    steps.push(vec![(n + 1).to_string(), real(*s)]);
                }
                vec![psi, bounds, steps]
            }
            Report::Solve(r) => {
                let mut res = Table::new("residuals", ["x", "y", "residual_norm", "gamma", "admissible"]);
                for s in &r.residual_grid {
                    res.push(vec![
                        real(s.x),
                        real(s.y),
                        real(s.residual_norm),
                        s.gamma_value.map(real).unwrap_or_default(),
                        s.admissible.to_string(),
                    ]);
                }
                let mut laws = Table::new("laws", ["law", "max_deviation", "passed"]);
                for l in r.structure.iter().flat_map(|s| &s.laws) {
                    laws.push(vec![l.law.clone(), real(l.max_deviation), l.passed.to_string()]);
                }
                vec![res, laws]
            }
            Report::Hyperstab(r) => hyperstab_tables(r),
        }
    }
}

fn hyperstab_tables(r: &HyperstabReport<f64>) -> Vec<Table> {
    let mut out = Vec::new();
    let mut k = Table::new("constants", ["m", "u", "v", "w", "A", "B", "C", "P", "sigma", "in_M0"]);
    for c in &r.m0.sweep {
        k.push(vec![
            c.m.to_string(),
            real(c.u),
            real(c.v),
            real(c.w),
            real(c.a),
            real(c.b),
            real(c.c),
            real(c.p),
            real(c.sigma),
            c.in_m0.to_string(),
        ]);
    }
    out.push(k);
    let dim = r.config.space.dim;
    for m in &r.per_m {
        let mut header = vec!["x".to_string()];
        header.extend(indexed("Qm", dim));
        header.extend(indexed("f0", dim));
        header.push("abs_dev".into());
        let mut t = Table::new(format!("qm_m{}", m.m), header);
        for row in &m.qm.rows {
            let mut cells = vec![real(row.x)];
            cells.extend(vector_cells(&row.qm));
            cells.extend(vector_cells(&row.f0));
            cells.push(real(row.abs_dev));
            t.push(cells);
        }
        out.push(t);
        let mut b = Table::new(format!("bounds_m{}", m.m), ["x", "witness", "deviation", "bound"]);
        for row in &m.bounds {
            b.push(vec![
                real(row.x),
                row.witness.to_string(),
                real(row.deviation),
                real(row.bound),
            ]);
        }
        out.push(b);
    }
    let mut trend = Table::new("trend", ["m", "sup_dev_f"]);
    for t in &r.trend {
        trend.push(vec![t.m.to_string(), real(t.sup_dev_f)]);
    }
    out.push(trend);
    out
}

/// Serialized `report.json`; deterministic for a given config.
pub fn report_json(report: &ReportFile) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(report)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Computes, then writes `report.json`, any CSV tables and
/// `run_metadata.json` into the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let report = compute(cfg)?;
    let dir = &cfg.output;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut files = vec![write_atomic(dir, "report.json", &report_json(&report)?)?];
    if cfg.format == Format::Csv {
        files.extend(emit_csv(&report.tables(), dir)?);
    }
    let outcome = RunOutcome {
        passed: report.passed,
        warnings: report.warnings().to_vec(),
        files,
    };
    let meta = Metadata {
        timestamp: chrono::Utc::now().to_rfc3339(),
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command(),
        seed: report.seed,
        threads: rayon::current_num_threads(),
        exit_code: outcome.exit_code(),
        files: &outcome.files,
    };
    let mut bytes = serde_json::to_vec_pretty(&meta)?;
    bytes.push(b'\n');
    write_atomic(dir, "run_metadata.json", &bytes)?;
    Ok(outcome)
}
