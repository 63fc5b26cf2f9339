use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num::complex::Complex;
use serde_json::json;

use sparse_circulant::caps::Caps;
use sparse_circulant::circulant::{sampler_by_name, ZeroPolicy};
use sparse_circulant::experiments::{
    determinant_experiment, esd_convergence_experiment, family_by_name, order_distribution_limit_check,
    ExperimentConfig,
};
use sparse_circulant::limit::{
    alpha_density_estimate, c_constant, c_infinity, c_infinity_asymptote, eta_atoms, lam_leung_zero_in_sumset,
    mobius_approx_error, LogConstant,
};
use sparse_circulant::linsys::{
    snf_diagonal, solution_density, solution_density_bruteforce, IntegerMatrix,
};
use sparse_circulant::moments::{moment_report, ExactComplex, MomentProblem};
use sparse_circulant::number_theory::{format_rational, parse_rational, rational_to_f64};
use sparse_circulant::output::{
    atoms_csv, records_csv, scatter_svg, spectrum_csv, to_json, ConstantReport, Manifest, SampleRecord,
};
use sparse_circulant::seed::rng_for;
use sparse_circulant::{Error, FiniteAbelianGroup};

#[derive(Parser)]
#[command(name = "sparse-circulant", version, about = "Spectra and limit laws of sparse random G-circulant matrices")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Directory for CSV/JSON/SVG outputs; nothing is written without it.
    #[arg(long, global = true, env = "SPARSE_CIRCULANT_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "SPARSE_CIRCULANT_WORKERS")]
    workers: Option<usize>,
    /// Largest m^d for atom enumeration.
    #[arg(long, global = true, env = "SPARSE_CIRCULANT_ATOM_CAP")]
    atom_cap: Option<u64>,
    /// Largest group for dense-matrix checks.
    #[arg(long, global = true, env = "SPARSE_CIRCULANT_DENSE_CAP")]
    dense_cap: Option<u64>,
    /// Eigenvalue zero tolerance, or `certified` for the root-sum bound.
    #[arg(long, global = true, env = "SPARSE_CIRCULANT_ZERO_TOL", value_parser = parse_zero_policy)]
    zero_tol: Option<ZeroPolicy>,
}

impl Common {
    fn caps(&self) -> Caps {
        let mut caps = Caps::default();
        if let Some(a) = self.atom_cap {
            caps.atoms = a;
        }
        if let Some(d) = self.dense_cap {
            caps.dense = d;
        }
        caps
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample one circulant and write its spectrum.
    Spectrum {
        #[arg(long, env = "SPARSE_CIRCULANT_GROUP")]
        group: FiniteAbelianGroup,
        #[arg(long, env = "SPARSE_CIRCULANT_D")]
        d: usize,
        #[arg(long, env = "SPARSE_CIRCULANT_SEED")]
        seed: u64,
        /// `with-replacement` or `distinct`.
        #[arg(long, default_value = "with-replacement")]
        sampler: String,
    },
    /// Distance of sampled spectral distributions to the family's limit law.
    EsdExperiment(ExperimentArgs),
    /// Normalised log-determinants along a family.
    DetExperiment(ExperimentArgs),
    /// Exact, brute-force and Monte Carlo moments of W = (1/|G|) Σ |λ − z|^{2k}.
    Moments {
        #[arg(long, env = "SPARSE_CIRCULANT_GROUP")]
        group: FiniteAbelianGroup,
        #[arg(long, env = "SPARSE_CIRCULANT_D")]
        d: usize,
        #[arg(long, env = "SPARSE_CIRCULANT_K")]
        k: u32,
        /// Shift as `re,im` (rationals or decimals).
        #[arg(long, env = "SPARSE_CIRCULANT_Z", default_value = "0,0", value_parser = parse_z)]
        z: ExactComplex,
        #[arg(long, env = "SPARSE_CIRCULANT_TRIALS", default_value_t = 1000)]
        trials: u64,
        #[arg(long, env = "SPARSE_CIRCULANT_SEED")]
        seed: u64,
    },
    /// Atoms of η_m^{*d} and the constant c_{m,d}; with a seed, also a c_∞,d estimate.
    LimitLaw {
        #[arg(long)]
        m: u64,
        #[arg(long, env = "SPARSE_CIRCULANT_D")]
        d: u32,
        #[arg(long, env = "SPARSE_CIRCULANT_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Solution density of Ax = 0 over a group, and of the transposed system.
    LinsysCheck {
        /// Rows separated by `;`, entries by `,`.
        #[arg(long)]
        matrix: IntegerMatrix,
        #[arg(long, env = "SPARSE_CIRCULANT_GROUP")]
        group: FiniteAbelianGroup,
    },
    /// Order distribution of a group, or along a family with distances to its limit.
    OrderDist {
        #[arg(long, env = "SPARSE_CIRCULANT_GROUP", conflicts_with = "family")]
        group: Option<FiniteAbelianGroup>,
        #[arg(long, env = "SPARSE_CIRCULANT_FAMILY", requires = "n_list")]
        family: Option<String>,
        #[arg(long, env = "SPARSE_CIRCULANT_N_LIST", value_delimiter = ',')]
        n_list: Vec<u64>,
    },
    /// Whether 0 is a sum of d n-th roots of unity.
    LamLeung {
        #[arg(long, env = "SPARSE_CIRCULANT_N")]
        n: u64,
        #[arg(long, env = "SPARSE_CIRCULANT_D")]
        d: u64,
    },
    /// Fraction of n ≤ N with 0 not a sum of d n-th roots of unity.
    AlphaDensity {
        #[arg(long, env = "SPARSE_CIRCULANT_D")]
        d: u64,
        #[arg(long, env = "SPARSE_CIRCULANT_N")]
        n: u64,
    },
    /// Sup error of the truncated Möbius approximation of δ_m.
    MobiusCheck {
        #[arg(long)]
        m: u64,
        #[arg(long, env = "SPARSE_CIRCULANT_D")]
        d: u32,
        #[arg(long, env = "SPARSE_CIRCULANT_K")]
        k: u64,
        #[arg(long, env = "SPARSE_CIRCULANT_N")]
        n: u64,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// `cyclic`, `homocyclic:m` or `twisted`.
    #[arg(long, env = "SPARSE_CIRCULANT_FAMILY")]
    family: String,
    #[arg(long, env = "SPARSE_CIRCULANT_D")]
    d: usize,
    #[arg(long, env = "SPARSE_CIRCULANT_N_LIST", value_delimiter = ',', required = true)]
    n_list: Vec<u64>,
    #[arg(long, env = "SPARSE_CIRCULANT_TRIALS")]
    trials: u64,
    #[arg(long, env = "SPARSE_CIRCULANT_SEED")]
    seed: u64,
    /// Largest total degree k + l of compared moments.
    #[arg(long, default_value_t = 4)]
    max_degree: u32,
}

impl ExperimentArgs {
    fn config(&self, common: &Common) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(&self.family, self.d, self.n_list.clone(), self.trials, self.seed);
        cfg.caps = common.caps();
        cfg.max_degree = self.max_degree;
        if let Some(p) = common.zero_tol {
            cfg.zero_policy = p;
        }
        cfg
    }
}

fn parse_zero_policy(s: &str) -> Result<ZeroPolicy, String> {
    if s == "certified" {
        return Ok(ZeroPolicy::RootSumCertified);
    }
    match s.parse::<f64>() {
        Ok(t) if t >= 0.0 && t.is_finite() => Ok(ZeroPolicy::Threshold(t)),
        _ => Err(format!("expected a non-negative number or `certified`, got {s:?}")),
    }
}

fn parse_z(s: &str) -> Result<ExactComplex, String> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    let re = parse_rational(re.trim()).map_err(|e| e.to_string())?;
    let im = parse_rational(im.trim()).map_err(|e| e.to_string())?;
    Ok(Complex::new(re, im))
}

/// Collects output files and writes them, with a manifest, at the end.
struct Outputs {
    dir: Option<PathBuf>,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, files: Vec::new() }
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.into(), contents));
    }

    fn finish(self, command: &str, seed: Option<u64>, caps: Caps, config: serde_json::Value) -> Result<(), Error> {
        let Some(dir) = self.dir else { return Ok(()) };
        fs::create_dir_all(&dir)?;
        let mut manifest = Manifest::new(command, seed, caps, config);
        for (name, contents) in &self.files {
            write(&dir, name, contents)?;
            manifest.files.push(name.clone());
        }
        write(&dir, "manifest.json", &to_json(&manifest)?)?;
        println!("wrote {} files to {}", self.files.len() + 1, dir.display());
        Ok(())
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn run(cli: Cli) -> Result<(), Error> {
    let common = cli.common;
    let caps = common.caps();
    let mut out = Outputs::new(common.out.clone());
    match cli.command {
        Command::Spectrum { group, d, seed, sampler } => {
            let sampler = sampler_by_name(&sampler)?;
            let c = sampler.sample(&group, d, &mut rng_for(seed, &[]))?;
            let spectrum = c.spectrum(caps.enumeration)?;
            let tol = common.zero_tol.unwrap_or_default().tolerance(&group, d)?;
            println!("group {group} (|G| = {}), d = {d}, sampler {}", spectrum.len(), sampler.name());
            println!("support {}", c.support.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
            println!("energy Σ S(x)² = {}", c.energy());
            println!("log|det|/|G| = {}", fmt_opt(spectrum.log_abs_det_normalized(tol).finite()));
            if spectrum.len() as u64 <= caps.dense {
                println!("eigenvector residual = {:.3e}", c.verify_normality(caps.dense)?);
            }
            let exponent = group.exponent()?;
            let atoms = u32::try_from(d)
                .ok()
                .and_then(|d32| eta_atoms(exponent, d32, caps.atoms).ok());
            out.add("spectrum.csv", spectrum_csv(&spectrum)?);
            out.add("sample.json", to_json(&SampleRecord::new(&c, seed))?);
            out.add(
                "scatter.svg",
                scatter_svg(&spectrum.eigenvalues, atoms.as_ref(), d as f64, &format!("{group}, d = {d}")),
            );
            let config = json!({"group": group.to_string(), "d": d, "sampler": sampler.name()});
            out.finish("spectrum", Some(seed), caps, config)
        }
        Command::EsdExperiment(args) => {
            let cfg = args.config(&common);
            let rep = esd_convergence_experiment(&cfg)?;
            println!("{:>8} {:>12} {:>14} {:>14} {:>12} {:>14}", "n", "|G|", "median dist", "mean dist", "iqr dist", "median binned");
            for r in &rep.records {
                println!(
                    "{:>8} {:>12} {:>14.6} {:>14.6} {:>12.6} {:>14.6}",
                    r.n, r.cardinality, r.median_distance, r.mean_distance, r.iqr_distance, r.median_discrepancy
                );
            }
            println!("median halves from first to last n: {}", rep.halves());
            out.add("esd_trials.csv", records_csv(&rep.trials)?);
            out.add("esd_summary.json", to_json(&rep.records)?);
            let seed = cfg.seed;
            out.finish("esd-experiment", Some(seed), caps, serde_json::to_value(&cfg)?)
        }
        Command::DetExperiment(args) => {
            let cfg = args.config(&common);
            let rep = determinant_experiment(&cfg)?;
            println!("{:>8} {:>12} {:>12} {:>12} {:>10}", "n", "|G|", "mean", "stddev", "singular");
            for s in &rep.summaries {
                println!(
                    "{:>8} {:>12} {:>12} {:>12} {:>10.3}",
                    s.n,
                    s.cardinality,
                    fmt_opt(s.mean),
                    fmt_opt(s.stddev),
                    s.singular_fraction
                );
            }
            out.add("det_trials.csv", records_csv(&rep.trials)?);
            out.add("det_summary.json", to_json(&rep.summaries)?);
            let seed = cfg.seed;
            out.finish("det-experiment", Some(seed), caps, serde_json::to_value(&cfg)?)
        }
        Command::Moments { group, d, k, z, trials, seed } => {
            let problem = MomentProblem {
                group,
                d,
                k,
                z,
                trials,
                seed,
                caps,
            };
            let report = moment_report(&problem)?;
            println!("group {}, d = {d}, k = {k}, z = {} + {}i", report.group, report.z[0], report.z[1]);
            for r in &report.results {
                let mut line = format!("{:>12}: E[W] = {:.10}", r.method, r.expectation);
                if let Some(q) = &r.expectation_exact {
                    line += &format!(" (= {q})");
                }
                if let Some(se) = r.standard_error {
                    line += &format!(" ± {se:.6}");
                }
                if let Some(v) = r.variance {
                    line += &format!(", Var(W) = {v:.10}");
                }
                if let Some(q) = &r.variance_exact {
                    line += &format!(" (= {q})");
                }
                println!("{line}");
            }
            for (method, reason) in &report.skipped {
                println!("{method:>12}: skipped ({reason})");
            }
            out.add("moments.json", to_json(&report)?);
            let config = json!({"group": report.group.to_string(), "d": d, "k": k, "z": report.z, "trials": trials});
            out.finish("moments", Some(seed), caps, config)
        }
        Command::LimitLaw { m, d, seed, samples } => {
            let atoms = eta_atoms(m, d, caps.atoms)?;
            println!("η_{m}^(*{d}): {} atoms", atoms.atoms.len());
            for a in &atoms.atoms {
                println!("  {:>10.6} {:+.6}i  weight {}", a.location.re, a.location.im, format_rational(&a.weight));
            }
            let c = c_constant(m, d, caps.atoms)?;
            match c {
                LogConstant::Finite(v) => println!("c = {v:.6}"),
                LogConstant::MinusInfinity => println!("c = -inf (0 is an atom)"),
            }
            let mut constants = vec![ConstantReport::new(m, d, c)];
            if let Some(seed) = seed {
                let est = c_infinity(d, samples, seed)?;
                println!(
                    "c_inf ≈ {:.6} ± {:.6} ({} samples); log(d)/2 - γ/2 = {:.6}",
                    est.estimate,
                    est.standard_error,
                    est.samples,
                    c_infinity_asymptote(d)
                );
                constants.push(ConstantReport {
                    m: 0,
                    d,
                    c: Some(est.estimate),
                    flag: "monte_carlo_infinite_order",
                });
            }
            out.add("atoms.csv", atoms_csv(&atoms)?);
            out.add("constants.json", to_json(&constants)?);
            let config = json!({"m": m, "d": d, "samples": seed.map(|_| samples)});
            out.finish("limit-law", seed, caps, config)
        }
        Command::LinsysCheck { matrix, group } => {
            let diag = snf_diagonal(&matrix)?;
            let lhs = solution_density(&matrix, &group)?;
            let rhs = solution_density(&matrix.transpose(), &group)?;
            println!("A = {matrix}, G = {group}");
            println!("Smith diagonal: {diag:?}");
            println!("P(Ax = 0) = {}", format_rational(&lhs));
            match solution_density_bruteforce(&matrix, &group, caps.brute_force) {
                Ok(b) => println!("brute force:  {} (agree: {})", format_rational(&b), b == lhs),
                Err(Error::CapExceeded { .. }) => println!("brute force:  skipped (over cap)"),
                Err(e) => return Err(e),
            }
            println!("P(Aᵀy = 0) = {}", format_rational(&rhs));
            println!("duality holds: {}", lhs == rhs);
            Ok(())
        }
        Command::OrderDist { group, family, n_list } => {
            match (group, family) {
                (Some(g), None) => {
                    let dist = g.order_distribution(caps.enumeration)?;
                    println!("order distribution of {g}:");
                    for (o, w) in &dist {
                        println!("  {o:>10}  {}", format_rational(w));
                    }
                }
                (None, Some(f)) => {
                    let family = family_by_name(&f)?;
                    for check in order_distribution_limit_check(family.as_ref(), &n_list, caps.enumeration)? {
                        let top: BTreeMap<_, _> = check
                            .distribution
                            .iter()
                            .map(|(o, w)| (*o, format_rational(w)))
                            .collect();
                        println!(
                            "n = {:>4} {}: TV = {} ({:.3e}), limit mass at ∞ = {}, ρ = {:?}",
                            check.n,
                            check.group,
                            format_rational(&check.tv_distance),
                            rational_to_f64(&check.tv_distance),
                            format_rational(&check.escaping_mass),
                            top
                        );
                    }
                }
                _ => return Err(Error::Invalid("give either --group or --family with --n-list".into())),
            }
            Ok(())
        }
        Command::LamLeung { n, d } => {
            println!("0 ∈ {d}·R_{n}: {}", lam_leung_zero_in_sumset(n, d)?);
            Ok(())
        }
        Command::AlphaDensity { d, n } => {
            let a = alpha_density_estimate(d, n)?;
            println!("#{{n ≤ {n} : 0 ∉ {d}·R_n}} / {n} = {} ≈ {:.6}", format_rational(&a), rational_to_f64(&a));
            Ok(())
        }
        Command::MobiusCheck { m, d, k, n } => {
            let e = mobius_approx_error(m, d, k, n)?;
            println!(
                "sup error = {} ≈ {:.6e}; bound 1/K = 1/{k}; holds: {}",
                format_rational(&e),
                rational_to_f64(&e),
                rational_to_f64(&e) <= 1.0 / k as f64
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.common.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(w);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_policy_values() {
        assert!(matches!(parse_zero_policy("certified"), Ok(ZeroPolicy::RootSumCertified)));
        assert!(matches!(parse_zero_policy("1e-9"), Ok(ZeroPolicy::Threshold(t)) if t == 1e-9));
        assert!(parse_zero_policy("-1").is_err());
        assert!(parse_zero_policy("nan").is_err());
    }

    #[test]
    fn shift_values() {
        let z = parse_z("1/2, -0.25").unwrap();
        assert_eq!(z.re, parse_rational("1/2").unwrap());
        assert_eq!(z.im, parse_rational("-1/4").unwrap());
        assert_eq!(parse_z("3").unwrap().im, parse_rational("0").unwrap());
        assert!(parse_z("a,b").is_err());
    }
}
