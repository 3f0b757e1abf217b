//! Command-line front end: catalog listing, pipeline runs, and targeted
//! dumps of individual pipeline stages.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fermi_coords::catalog::catalog;
use fermi_coords::config::{ReportFormat, RunConfig};
use fermi_coords::fermi::FermiChart;
use fermi_coords::frame::adapted_frame;
use fermi_coords::runner::{run_cases, write_reports};
use fermi_coords::second_form::second_fundamental_form;
use fermi_coords::verify::conditions::check_conditions;
use fermi_coords::verify::linear::{frame_curvature_stack, predict_linear_jet};
use fermi_coords::verify::recursion::{reassemble_metric_jet, solve_frame_coefficients};
use fermi_coords::{Error, Result};

#[derive(Parser)]
#[command(
    name = "fermi-coords",
    about = "Adapted normal charts for submanifolds: construction, measurement, and cross-checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Jet order of the measured expansion (2 to 5).
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Absolute tolerance on condition residuals.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Base RNG seed for cases that do not set their own.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format: csv, json, or both.
    #[arg(long, global = true)]
    format: Option<ReportFormat>,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the built-in example geometries.
    Catalog,
    /// Run the full pipeline over the configured cases.
    Run {
        /// JSON run configuration; defaults to the built-in catalog.
        config: Option<PathBuf>,
    },
    /// Check the chart identities only.
    Verify { config: Option<PathBuf> },
    /// Dump the measured metric jet per case.
    Taylor { config: Option<PathBuf> },
    /// Dump the predicted derivative table per case.
    Predict { config: Option<PathBuf> },
    /// Solve the coefficient hierarchy and report the closed-loop deviation.
    Loop { config: Option<PathBuf> },
}

fn load_config(cli: &Cli, path: &Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default_catalog(),
    };
    if let Some(order) = cli.order {
        cfg.order = order;
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_catalog() {
    for entry in catalog() {
        let marker = if entry.family { " (family)" } else { "" };
        println!("{:<24} {}{}", entry.name, entry.description, marker);
    }
}

fn cmd_run(cfg: &RunConfig) -> Result<bool> {
    let records = run_cases(cfg)?;
    for r in &records {
        match &r.error {
            Some(e) => println!("{:<28} ERROR  {e}", r.case),
            None => {
                let family = match &r.family {
                    Some(f) => {
                        if f.pass {
                            "  family ok"
                        } else {
                            "  family FAIL"
                        }
                    }
                    None => "",
                };
                println!(
                    "{:<28} {}  conditions {:.2e}  first-order {:.2e}  gauss {:.2e}  loop {:.2e}{}  [{:.0} ms]",
                    r.case,
                    if r.pass { "pass" } else { "FAIL" },
                    r.condition_max,
                    r.first_order_max_deviation,
                    r.gauss_residual,
                    r.closed_loop_deviation,
                    family,
                    r.timing_ms,
                );
            }
        }
    }
    if let Some(dir) = &cfg.out_dir {
        for path in write_reports(cfg, &records, dir)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(records.iter().all(|r| r.pass))
}

/// Build one case's chart and hand its pieces to `f`.
fn for_each_case(
    cfg: &RunConfig,
    f: &mut dyn FnMut(&str, &fermi_coords::catalog::ResolvedCase, &FermiChart) -> Result<bool>,
) -> Result<bool> {
    let mut all = true;
    for cc in &cfg.cases {
        let mut cc = cc.clone();
        if cc.seed.is_none() {
            cc.seed = Some(cfg.seed);
        }
        let resolved = cc.resolved()?;
        let (metric, sub) = resolved.build()?;
        let frame = adapted_frame(&metric, &sub, &resolved.sig)?;
        let chart = FermiChart::build(
            &metric,
            &sub,
            &frame,
            &cfg.solver,
            cfg.order + 1,
            cfg.chart_radius,
        )?;
        all &= f(&cc.name, &resolved, &chart)?;
    }
    Ok(all)
}

fn cmd_verify(cfg: &RunConfig) -> Result<bool> {
    for_each_case(cfg, &mut |name, resolved, chart| {
        let report = check_conditions(chart.metric_jets(), &resolved.sig)?;
        let pass = report.passes(cfg.tol);
        println!("{name}: {} (scanned through degree {})", if pass { "pass" } else { "FAIL" }, report.order);
        for r in &report.residuals {
            println!(
                "  ({}) {:<18} residual {:.3e}  worst at {}",
                r.id, r.label, r.residual, r.worst_term
            );
        }
        Ok(pass)
    })
}

fn cmd_taylor(cfg: &RunConfig) -> Result<bool> {
    for_each_case(cfg, &mut |name, resolved, chart| {
        let n = resolved.sig.n();
        println!("{name}: measured metric jet, order {}", cfg.order);
        for i in 0..n {
            for j in i..n {
                let jet = &chart.metric_jets()[i * n + j];
                for (pos, &c) in jet.coeffs().iter().enumerate() {
                    if c.abs() > 1e-14 {
                        let exps = jet.shape().index_at(pos).to_vec();
                        println!("  g[{i}][{j}] K={exps:?}  {c:+.12e}");
                    }
                }
            }
        }
        Ok(true)
    })
}

fn cmd_predict(cfg: &RunConfig) -> Result<bool> {
    for cc in &cfg.cases {
        let mut cc = cc.clone();
        if cc.seed.is_none() {
            cc.seed = Some(cfg.seed);
        }
        let resolved = cc.resolved()?;
        let (metric, sub) = resolved.build()?;
        let frame = adapted_frame(&metric, &sub, &resolved.sig)?;
        let depth = cfg.order - 1;
        let curv = frame_curvature_stack(&metric, &frame, depth)?;
        let fund = second_fundamental_form(&metric, &sub, &frame, depth)?;
        let pred = predict_linear_jet(&curv, &fund, &resolved.sig, cfg.order)?;
        println!("{}: predicted derivatives, order {}", cc.name, cfg.order);
        for e in &pred.entries {
            if e.value.abs() > 1e-14 {
                println!("  g[{}][{}] K={:?}  {:+.12e}  [{:?}]", e.i, e.j, e.index, e.value, e.row);
            }
        }
    }
    Ok(true)
}

fn cmd_loop(cfg: &RunConfig) -> Result<bool> {
    let loop_order = cfg.order.min(3);
    for_each_case(cfg, &mut |name, resolved, chart| {
        let fc = solve_frame_coefficients(chart.metric_jets(), &resolved.sig, loop_order)?;
        let back = reassemble_metric_jet(&fc)?;
        let mut worst = 0.0f64;
        for (m, b) in chart.metric_jets().iter().zip(&back) {
            worst = worst.max(m.truncate(loop_order).try_sub(&b.truncate(loop_order))?.max_abs());
        }
        let pass = worst <= fermi_coords::verify::TOL_CLOSED_LOOP;
        println!(
            "{name}: closed-loop deviation {worst:.3e} at order {loop_order} ({})",
            if pass { "pass" } else { "FAIL" }
        );
        Ok(pass)
    })
}

/// Dying quietly when the reader of a pipe goes away (`catalog | head`)
/// is the expected shell behavior; Rust masks SIGPIPE by default and
/// turns it into a println panic instead.
#[cfg(unix)]
fn restore_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn restore_sigpipe() {}

fn main() -> ExitCode {
    restore_sigpipe();
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Cmd::Catalog => {
            cmd_catalog();
            Ok(true)
        }
        Cmd::Run { config } => load_config(&cli, config).and_then(|cfg| cmd_run(&cfg)),
        Cmd::Verify { config } => load_config(&cli, config).and_then(|cfg| cmd_verify(&cfg)),
        Cmd::Taylor { config } => load_config(&cli, config).and_then(|cfg| cmd_taylor(&cfg)),
        Cmd::Predict { config } => load_config(&cli, config).and_then(|cfg| cmd_predict(&cfg)),
        Cmd::Loop { config } => load_config(&cli, config).and_then(|cfg| cmd_loop(&cfg)),
    };
    match outcome {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) | Error::Json(_) | Error::Io(_) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
