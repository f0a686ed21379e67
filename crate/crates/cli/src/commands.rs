use crate::config::{parse_config, RawBond, RawConfig, RawOptions, RawSite, Config};
use crate::error::CliError;
use crate::output::{emit, float, read, Table, VERSION};
use rayon::prelude::*;
use serde_json::json;
use spinfactory::design::{complete_fields, coupling_family, DesignReport, ParallelField};
use spinfactory::entanglement::{self, PairSelector, SweepMode, SweepRange, SweepWarning};
use spinfactory::infer::{enumerate_chain, BranchPolicy};
use spinfactory::quantum::{build_hamiltonian, spectrum as level_spectrum, verify_eigenstate};
use spinfactory::recipes::{complexity_rating, spiral_system, Scenario, SpiralSpec, Topology};
use spinfactory::{Angles, Bond, FactorizedSystem, Mat3, Triad};
use std::path::Path;

/// Largest Hilbert space for which `design` double-checks its output by
/// applying the dense Hamiltonian.
const CHECK_DIMENSION: usize = 1024;

fn load(path: &Path) -> Result<Config, CliError> {
    Ok(parse_config(&read(path)?)?)
}

fn factorized(cfg: &Config) -> Result<FactorizedSystem, CliError> {
    let angles = cfg.explicit_angles()?;
    let sys = cfg.system(&angles)?;
    Ok(FactorizedSystem::new(sys, angles)?)
}

fn theta_residual(fs: &FactorizedSystem) -> Result<f64, CliError> {
    let h = build_hamiltonian(&fs.system)?;
    Ok(verify_eigenstate(&h, &fs.theta_state()?, fs.theta_energy(&fs.system)))
}

/// A design as a config document that `verify`, `spectrum` and `sweep` accept.
fn design_document(report: &DesignReport, cfg_options: RawOptions, meta: serde_json::Value) -> RawConfig {
    let sites = report
        .system
        .sites
        .iter()
        .zip(&report.angles)
        .map(|(s, a)| RawSite {
            spin: s.spin(),
            theta: Some(a.theta),
            phi: Some(a.phi),
        })
        .collect();
    let bonds = report
        .system
        .bonds
        .iter()
        .map(|b| {
            let m = &b.matrix;
            let diagonal = (0..3).all(|r| (0..3).all(|c| r == c || m[(r, c)] == 0.0));
            RawBond {
                i: b.i,
                j: b.j,
                coupling: diagonal.then(|| [m[(0, 0)], m[(1, 1)], m[(2, 2)]]),
                matrix: (!diagonal).then(|| std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]))),
            }
        })
        .collect();
    RawConfig {
        meta: Some(meta),
        sites,
        bonds,
        fields: Some(report.system.fields.iter().map(|h| [h.x, h.y, h.z]).collect()),
        h_parallel: None,
        options: Some(cfg_options),
    }
}

fn design_meta(source: &str, hash: &str, report: &DesignReport, eigen_residual: Option<f64>) -> serde_json::Value {
    json!({
        "tool": "spinfactory",
        "version": VERSION,
        "source": source,
        "config_hash": hash,
        "energy": report.energy,
        "condition_residual": report.residual,
        "eigen_residual": eigen_residual,
        "h_parallel": report.fields.h_par,
        "case_tags": report.families.iter().map(|f| format!("{:?}", f.case_tag)).collect::<Vec<_>>(),
    })
}

fn check_design(report: &DesignReport, tolerance: f64) -> Result<Option<f64>, CliError> {
    if report.residual > tolerance {
        return Err(CliError::Numerical(format!(
            "given couplings violate the pair conditions (residual {:e} > {tolerance:e})",
            report.residual
        )));
    }
    if report.system.dimension() > CHECK_DIMENSION {
        return Ok(None);
    }
    let r = theta_residual(&report.factorized())?;
    if r > tolerance {
        return Err(CliError::Numerical(format!("eigenstate residual {r:e} exceeds {tolerance:e}")));
    }
    Ok(Some(r))
}

fn to_json(doc: &RawConfig) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("config documents always serialize");
    s.push('\n');
    s
}

pub fn design(state: &Path, j_norm: Option<f64>, h_par: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(state)?;
    let j_norm = j_norm.unwrap_or(cfg.options.j_norm);
    if !(j_norm.is_finite() && j_norm > 0.0) {
        return Err(CliError::Validation(format!("--j-norm must be positive, got {j_norm}")));
    }
    if cfg.bonds.is_empty() {
        return Err(CliError::Validation("design needs at least one bond".into()));
    }
    if cfg.fields.is_some() {
        return Err(CliError::Validation("design computes the fields; remove `fields` from the state file".into()));
    }
    let angles = cfg.angles_or_random();
    let triads: Vec<Triad> = angles.iter().map(|a| Triad::from_direction(&a.direction())).collect();
    // bonds with a given coupling keep it; the rest get the family default
    let bonds: Vec<Bond> = cfg
        .bonds
        .iter()
        .map(|b| match b.matrix {
            Some(m) => Bond::new(b.i, b.j, m),
            None => Bond::xyz(b.i, b.j, coupling_family(&triads[b.i], &triads[b.j]).default_member(j_norm)),
        })
        .collect();
    let h_par = match h_par {
        Some(h) => ParallelField::Uniform(h),
        None => cfg.h_parallel.clone().unwrap_or(ParallelField::Uniform(0.0)),
    };
    let report = complete_fields(&angles, &cfg.sites, bonds, &h_par)?;
    let eigen_residual = check_design(&report, cfg.options.tolerance)?;
    let options = RawOptions {
        j_norm: Some(j_norm),
        tolerance: Some(cfg.options.tolerance),
        seed: Some(cfg.options.seed),
    };
    let doc = design_document(&report, options, design_meta("design", &cfg.hash, &report, eigen_residual));
    emit(out, &to_json(&doc))?;
    eprintln!(
        "designed {} sites, {} bonds: E = {}, condition residual {:.3e}",
        report.system.len(),
        report.system.bonds.len(),
        float(report.energy),
        report.residual
    );
    Ok(())
}

/// `J^{k,k+1}` for each bond of an open chain, whatever order or orientation
/// the bonds were listed in.
fn chain_couplings(cfg: &Config) -> Result<Vec<Mat3>, CliError> {
    let n = cfg.len();
    if n < 2 || cfg.bonds.len() != n - 1 {
        return Err(CliError::Validation(format!(
            "infer needs an open chain: {} bonds for {n} sites",
            cfg.bonds.len()
        )));
    }
    let bonds = cfg.coupled_bonds()?;
    let mut out: Vec<Option<Mat3>> = vec![None; n - 1];
    for b in &bonds {
        let (k, m) = if b.j == b.i + 1 {
            (b.i, b.matrix)
        } else if b.i == b.j + 1 {
            (b.j, b.matrix.transpose())
        } else {
            return Err(CliError::Validation(format!(
                "bond ({}, {}) does not join neighbouring sites of an open chain",
                b.i, b.j
            )));
        };
        if out[k].replace(m).is_some() {
            return Err(CliError::Validation(format!("sites {k} and {} are bonded twice", k + 1)));
        }
    }
    Ok(out.into_iter().map(|m| m.expect("n-1 distinct neighbour bonds cover the chain")).collect())
}

fn branch_policy(s: &str, bonds: usize) -> Result<BranchPolicy, CliError> {
    match s {
        "all" => Ok(BranchPolicy::All),
        "first" => Ok(BranchPolicy::First),
        bits if bits.len() == bonds && bits.chars().all(|c| c == '0' || c == '1') => {
            Ok(BranchPolicy::Word(bits.chars().map(|c| c == '1').collect()))
        }
        other => Err(CliError::Validation(format!(
            "--branches must be all, first, or {bonds} bits of 0/1, got '{other}'"
        ))),
    }
}

pub fn infer(system: &Path, seed_site: usize, branches: &str, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(system)?;
    let couplings = chain_couplings(&cfg)?;
    if seed_site >= cfg.len() {
        return Err(CliError::Validation(format!(
            "--seed-site {seed_site} out of range for {} sites",
            cfg.len()
        )));
    }
    let seed = cfg.angles[seed_site].ok_or_else(|| {
        CliError::Validation(format!("sites[{seed_site}] needs theta and phi to seed the chain"))
    })?;
    let policy = branch_policy(branches, couplings.len())?;
    let configs = enumerate_chain(&couplings, seed, seed_site, &policy);

    let mut table = Table::new(&["branch_word", "site", "theta", "phi", "nx", "ny", "nz", "free", "max_residual"]);
    for c in &configs {
        let word = c.word_string();
        for (site, n) in c.directions.iter().enumerate() {
            let a = Angles::from_direction(n);
            table.push(vec![
                word.clone(),
                site.to_string(),
                float(a.theta),
                float(a.phi),
                float(n.x),
                float(n.y),
                float(n.z),
                c.free_sites.contains(&site).to_string(),
                float(c.max_residual),
            ]);
        }
    }
    emit(out, &table.render(&cfg.hash))?;
    eprintln!("{} compatible configuration(s)", configs.len());
    Ok(())
}

pub fn verify(system: &Path, tol: Option<f64>) -> Result<(), CliError> {
    let cfg = load(system)?;
    let tol = tol.unwrap_or(cfg.options.tolerance);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Validation(format!("--tol must be positive, got {tol}")));
    }
    let fs = factorized(&cfg)?;
    let residual = theta_residual(&fs)?;
    println!("energy {}", float(fs.theta_energy(&fs.system)));
    println!("residual {}", float(residual));
    if residual > tol {
        return Err(CliError::Numerical(format!(
            "product state is not an eigenstate: residual {residual:e} > {tol:e}"
        )));
    }
    Ok(())
}

pub fn spectrum(system: &Path, range: SweepRange, out: Option<&Path>) -> Result<(), CliError> {
    let cfg = load(system)?;
    let fs = factorized(&cfg)?;
    let theta = fs.theta_state()?;
    let rows = range
        .values()
        .par_iter()
        .map(|&h| {
            let sys = fs.with_parallel_field(h);
            let rep = level_spectrum(&sys, Some(&theta))?;
            Ok(vec![
                float(h),
                float(rep.eigenvalues[0]),
                float(rep.gap),
                rep.ground_degeneracy.to_string(),
                float(fs.theta_energy(&sys)),
                float(rep.theta_overlap.unwrap_or(0.0)),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table::new(&["h_par", "gs_energy", "gap", "ground_degeneracy", "theta_energy", "theta_overlap"]);
    for r in rows {
        table.push(r);
    }
    emit(out, &table.render(&cfg.hash))?;
    Ok(())
}

/// The uniform parallel field the sweep perturbs around: `h_parallel` when
/// given, else the common parallel component of the configured fields.
fn base_parallel_field(cfg: &Config, fs: &FactorizedSystem) -> Result<f64, CliError> {
    match &cfg.h_parallel {
        Some(ParallelField::Uniform(h)) if cfg.fields.is_none() => return Ok(*h),
        Some(ParallelField::PerSite(_)) => {
            return Err(CliError::Validation("sweep needs a uniform h_parallel".into()))
        }
        _ => {}
    }
    let par: Vec<f64> = fs
        .system
        .fields
        .iter()
        .zip(fs.directions())
        .map(|(h, n)| h.dot(&n))
        .collect();
    let scale = par.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    if par.iter().any(|x| (x - par[0]).abs() > 1e-9 * scale) {
        return Err(CliError::Validation(
            "fields have site-dependent parallel components; set a uniform h_parallel".into(),
        ));
    }
    Ok(par[0])
}

pub fn sweep(
    system: &Path,
    mode: SweepMode,
    range: SweepRange,
    pairs: &PairSelector,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = load(system)?;
    let fs = factorized(&cfg)?;
    let h_par = base_parallel_field(&cfg, &fs)?;
    let table = entanglement::sweep(&fs, h_par, mode, range, pairs)?;
    for w in &table.warnings {
        match w {
            SweepWarning::LevelCrossing { param, overlap } => {
                eprintln!("warning: ground state changes at param = {param} (overlap {overlap:.3})")
            }
        }
    }
    let mut csv = Table::new(&["param", "i", "j", "concurrence", "gs_energy", "gap"]);
    for r in &table.rows {
        csv.push(vec![
            float(r.param),
            r.i.to_string(),
            r.j.to_string(),
            float(r.concurrence),
            float(r.gs_energy),
            float(r.gap),
        ]);
    }
    emit(out, &csv.render(&cfg.hash))?;
    eprintln!("{} rows", csv.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn spiral(
    n: usize,
    k: i64,
    theta: f64,
    j: f64,
    h_par: f64,
    open: bool,
    spin: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Validation("--n must be positive".into()));
    }
    let mut spec = SpiralSpec::cyclic(n, k, theta, j, h_par);
    spec.spin = spinfactory::SiteSpec::new(spin)?;
    if open {
        spec.topology = Topology::Open;
    }
    let report = spiral_system(&spec)?;
    let tolerance = crate::config::DEFAULT_TOLERANCE;
    let eigen_residual = check_design(&report, tolerance)?;
    // the arguments stand in for a config file in the hash
    let args = format!("spiral n={n} k={k} theta={theta:e} j={j:e} h_par={h_par:e} open={open} spin={spin:e}");
    let hash = crate::config::config_hash(&args);
    let options = RawOptions {
        j_norm: None,
        tolerance: Some(tolerance),
        seed: None,
    };
    let doc = design_document(&report, options, design_meta("spiral", &hash, &report, eigen_residual));
    emit(out, &to_json(&doc))?;
    eprintln!("spiral Δφ = {}, E = {}", float(spec.dphi), float(report.energy));
    Ok(())
}

pub fn complexity(scenario: &str, n: usize) -> Result<(), CliError> {
    let sc: Scenario = scenario.parse().map_err(|e: spinfactory::recipes::RecipeError| {
        let known: Vec<&str> = Scenario::ALL.iter().map(Scenario::name).collect();
        CliError::Validation(format!("{e}; known: {}", known.join(", ")))
    })?;
    let r = complexity_rating(sc, n)?;
    println!("scenario,n,m,k");
    println!("{},{n},{},{}", r.scenario, r.m, r.k);
    Ok(())
}
