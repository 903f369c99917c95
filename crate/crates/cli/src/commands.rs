use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use rydberg_gate::atom::{AtomModel, RydbergLevel};
use rydberg_gate::basis::{build_basis, gate_manifolds, CollectiveBasis, DEFAULT_CUTOFF_MHZ};
use rydberg_gate::dynamics::{field_scan, trace, uniform_grid};
use rydberg_gate::fields::FieldConfiguration;
use rydberg_gate::gate::{
    optimize_operating_point, rydberg_targets, ConvergenceRecord, ExcitationPattern, GateSimulator, OperatingPoint,
    OptimizerConfig, PatternSystem,
};
use rydberg_gate::hamiltonian::{Geometry, HamiltonianBuilder};
use rydberg_gate::report::{self, GateReport, RunManifest};
use rydberg_gate::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::{load_model, Common, FileConfig};
use crate::{Cli, Command, Mode, PointArgs};

const DEFAULT_SPACING_UM: f64 = 12.5;
const DEFAULT_ELECTRIC: f64 = 0.11912;
const DEFAULT_MAGNETIC: f64 = 3.5;
const DEFAULT_TAU_US: f64 = 2.42;
const DEFAULT_SCAN_TAU_US: f64 = 1.8;
const DEFAULT_TRACE_US: f64 = 3.0;
const DEFAULT_SCAN_WINDOW: (f64, f64) = (0.110, 0.125);
const DEFAULT_SCAN_POINTS: usize = 600;

struct Context {
    model: AtomModel,
    common: Common,
    file: FileConfig,
    out: Option<PathBuf>,
    force: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Point {
    spacing_um: f64,
    electric_v_per_cm: f64,
    magnetic_g: f64,
    tau_us: f64,
}

impl Context {
    fn point(&self, args: &PointArgs, default_tau: f64) -> Point {
        let p = &self.file.point;
        Point {
            spacing_um: args.spacing.or(p.spacing_um).unwrap_or(DEFAULT_SPACING_UM),
            electric_v_per_cm: args.electric.or(p.electric_v_per_cm).unwrap_or(DEFAULT_ELECTRIC),
            magnetic_g: args.magnetic.or(p.magnetic_g).unwrap_or(DEFAULT_MAGNETIC),
            tau_us: args.tau.or(p.tau_us).unwrap_or(default_tau),
        }
    }

    fn output(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn manifest(&self, command: &str, config: serde_json::Value) -> Result<RunManifest> {
        let config = json!({ "common": self.common, "command": config });
        Ok(RunManifest::new(command, &config, &self.model)?)
    }
}

fn companion(path: &Path, extension: &str) -> PathBuf {
    path.with_extension(extension)
}

fn fields(p: &Point) -> Result<FieldConfiguration> {
    Ok(FieldConfiguration::new(p.electric_v_per_cm, p.magnetic_g)?)
}

fn mode_system(mode: Mode, spacing_um: f64, model: &AtomModel) -> Result<(CollectiveBasis, Geometry)> {
    let t = rydberg_targets();
    let (initial, geometry): (Vec<RydbergLevel>, Geometry) = match mode {
        Mode::TwoAtom => (vec![t[0], t[2]], Geometry::pair(spacing_um)?),
        Mode::ThreeAtom => (t.to_vec(), Geometry::linear_triple(spacing_um)?),
    };
    Ok((build_basis(&initial, &gate_manifolds(), DEFAULT_CUTOFF_MHZ, model)?, geometry))
}

pub fn run(cli: Cli) -> Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let workers = cli.workers.or(file.workers);
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidConfig("--workers must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let (model, atomic_data) = load_model(cli.atomic_data.as_deref(), &file)?;
    let common = Common { atomic_data, decay: !cli.no_decay && file.decay.unwrap_or(true), workers };
    let ctx = Context { model, common, file, out: cli.out, force: cli.force };
    match cli.command {
        Command::Scan { mode, point, electric_min, electric_max, points } => {
            scan(&ctx, mode, &point, electric_min, electric_max, points)
        }
        Command::Trace { mode, point, steps } => trace_cmd(&ctx, mode, &point, steps),
        Command::Phases { pattern, point, steps } => phases(&ctx, &pattern, &point, steps),
        Command::TruthTable { point } => gate_report(&ctx, &point, false),
        Command::Fidelity { point } => gate_report(&ctx, &point, true),
        Command::Optimize { spacing, max_iterations } => optimize(&ctx, spacing, max_iterations),
        Command::Basis { mode, pattern } => basis(&ctx, mode, pattern.as_deref()),
    }
}

fn scan(
    ctx: &Context,
    mode: Mode,
    args: &PointArgs,
    electric_min: Option<f64>,
    electric_max: Option<f64>,
    points: Option<usize>,
) -> Result<()> {
    let s = &ctx.file.scan;
    let mut p = ctx.point(args, s.tau_us.unwrap_or(DEFAULT_SCAN_TAU_US));
    p.electric_v_per_cm = 0.0;
    let lo = electric_min.or(s.electric_min).unwrap_or(DEFAULT_SCAN_WINDOW.0);
    let hi = electric_max.or(s.electric_max).unwrap_or(DEFAULT_SCAN_WINDOW.1);
    let points = points.or(s.points).unwrap_or(DEFAULT_SCAN_POINTS);
    let grid = uniform_grid(lo, hi, points)?;
    let (basis, geometry) = mode_system(mode, p.spacing_um, &ctx.model)?;
    let builder = HamiltonianBuilder::new(&basis, &geometry, &ctx.model)?;
    let rows = field_scan(&grid, &fields(&p)?, p.tau_us, &builder, &basis, ctx.common.decay)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed == rows.len() {
        bail!(Error::Integration(format!("all {failed} scan points failed")));
    }
    if failed > 0 {
        eprintln!("warning: {failed} of {} scan points failed; see the error column", rows.len());
    }
    let config = json!({
        "mode": mode,
        "spacing_um": p.spacing_um,
        "magnetic_g": p.magnetic_g,
        "tau_us": p.tau_us,
        "electric_min": lo,
        "electric_max": hi,
        "points": points,
    });
    let manifest = ctx.manifest("scan", config)?.with_basis(basis.fingerprint());
    report::write_csv(&ctx.output("scan.csv"), &manifest, ctx.force, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["E_V_per_cm", "f", "p", "norm", "error"])?;
        for r in &rows {
            w.write_record([
                format!("{:.9}", r.electric_v_per_cm),
                format!("{:.12e}", r.f),
                format!("{:.12e}", r.p),
                format!("{:.12e}", r.norm),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

fn trace_cmd(ctx: &Context, mode: Mode, args: &PointArgs, steps: usize) -> Result<()> {
    let p = ctx.point(args, DEFAULT_TRACE_US);
    let (basis, geometry) = mode_system(mode, p.spacing_um, &ctx.model)?;
    let h = HamiltonianBuilder::new(&basis, &geometry, &ctx.model)?.at(&fields(&p)?, ctx.common.decay);
    let tr = trace(&h, &basis, p.tau_us, steps)?;
    let config = json!({ "mode": mode, "point": p, "steps": steps });
    let manifest = ctx.manifest("trace", config)?.with_basis(basis.fingerprint());
    report::write_csv(&ctx.output("trace.csv"), &manifest, ctx.force, |out| tr.write_csv(out))?;
    Ok(())
}

fn phases(ctx: &Context, labels: &[String], args: &PointArgs, steps: usize) -> Result<()> {
    let p = ctx.point(args, DEFAULT_TRACE_US);
    let labels: Vec<String> = if labels.is_empty() {
        ["r_r_r", "r_g_r", "r_r_g", "g_r_r"].map(String::from).to_vec()
    } else {
        labels.to_vec()
    };
    let f = fields(&p)?;
    let mut traces = Vec::new();
    let mut manifest_bases = Vec::new();
    for label in &labels {
        let pattern = ExcitationPattern::parse(label)?;
        let system = PatternSystem::new(pattern, p.spacing_um, &ctx.model)?;
        manifest_bases.push(system.basis.fingerprint());
        traces.push((pattern, system.trace(&f, p.tau_us, steps, ctx.common.decay)?));
    }
    let config = json!({ "patterns": labels, "point": p, "steps": steps });
    let mut manifest = ctx.manifest("phases", config)?;
    for fp in manifest_bases {
        manifest = manifest.with_basis(fp);
    }
    report::write_csv(&ctx.output("phases.csv"), &manifest, ctx.force, |out| {
        report::write_pattern_traces(&traces, out)
    })?;
    Ok(())
}

fn gate_report(ctx: &Context, args: &PointArgs, with_fidelity: bool) -> Result<()> {
    let p = ctx.point(args, DEFAULT_TAU_US);
    let op = OperatingPoint::new(p.electric_v_per_cm, p.magnetic_g, p.spacing_um, p.tau_us)?;
    let sim = GateSimulator::new(op, &ctx.model, ctx.common.decay)?;
    let rep = GateReport::new(&sim, with_fidelity);
    if with_fidelity {
        let fid = sim.average_fidelity();
        let manifest = ctx.manifest("fidelity", json!({ "point": p }))?;
        let json_path = ctx.output("fidelity.json");
        report::write_json(&json_path, &manifest, &rep, ctx.force)?;
        report::write_csv(&companion(&json_path, "csv"), &manifest, ctx.force, |out| fid.write_csv(out))?;
        println!("average fidelity {:.6}", fid.mean);
    } else {
        let manifest = ctx.manifest("truth-table", json!({ "point": p }))?;
        let csv_path = ctx.output("truth_table.csv");
        report::write_csv(&csv_path, &manifest, ctx.force, |out| rep.truth_table.write_csv(out))?;
        report::write_json(&companion(&csv_path, "json"), &manifest, &rep, ctx.force)?;
    }
    Ok(())
}

fn write_log(path: &Path, manifest: &RunManifest, force: bool, log: &[ConvergenceRecord]) -> Result<()> {
    report::write_csv(path, manifest, force, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "E_V_per_cm",
            "B_G",
            "tau_us",
            "residual_g_r_r",
            "residual_r_g_r",
            "residual_r_r_r",
            "fidelity",
        ])?;
        for r in log {
            w.write_record([
                r.iteration.to_string(),
                format!("{:.9}", r.electric_v_per_cm),
                format!("{:.6}", r.magnetic_g),
                format!("{:.6}", r.tau_us),
                format!("{:.6e}", r.residuals[0]),
                format!("{:.6e}", r.residuals[1]),
                format!("{:.6e}", r.residuals[2]),
                format!("{:.6}", r.fidelity),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(())
}

fn optimize(ctx: &Context, spacing: Option<f64>, max_iterations: Option<usize>) -> Result<()> {
    let mut cfg = ctx.file.optimizer.clone().unwrap_or_default();
    if let Some(r) = spacing.or(ctx.file.point.spacing_um) {
        cfg.spacing_um = r;
    }
    if let Some(n) = max_iterations {
        cfg.max_iterations = n;
    }
    cfg.with_decay = ctx.common.decay;
    let cfg: OptimizerConfig = cfg;
    let manifest = ctx.manifest("optimize", serde_json::to_value(&cfg)?)?;
    let json_path = ctx.output("optimize.json");
    let log_path = companion(&json_path, "csv");
    let mut log = Vec::new();
    let result = optimize_operating_point(&cfg, &ctx.model, &mut |r| {
        eprintln!(
            "iteration {}: E={:.6} B={:.4} tau={:.4} residuals={:.3?} F={:.4}",
            r.iteration, r.electric_v_per_cm, r.magnetic_g, r.tau_us, r.residuals, r.fidelity
        );
        log.push(r.clone());
    });
    write_log(&log_path, &manifest, ctx.force, &log)?;
    let outcome = result?;
    report::write_json(&json_path, &manifest, &outcome, ctx.force)?;
    let p = outcome.point;
    println!(
        "E = {:.6} V/cm, B = {:.4} G, tau = {:.4} us, R = {} um",
        p.electric_v_per_cm, p.magnetic_g, p.tau_us, p.spacing_um
    );
    Ok(())
}

fn basis(ctx: &Context, mode: Mode, pattern: Option<&str>) -> Result<()> {
    let (basis, config) = match pattern {
        Some(label) => {
            let pattern = ExcitationPattern::parse(label)?;
            let initial = pattern.rydberg_state();
            if initial.is_empty() {
                bail!(Error::InvalidConfig(format!("pattern {label} excites no atom")));
            }
            (build_basis(&initial, &gate_manifolds(), DEFAULT_CUTOFF_MHZ, &ctx.model)?, json!({ "pattern": label }))
        }
        None => (mode_system(mode, DEFAULT_SPACING_UM, &ctx.model)?.0, json!({ "mode": mode })),
    };
    let manifest = ctx.manifest("basis", config)?.with_basis(basis.fingerprint());
    report::write_csv(&ctx.output("basis.csv"), &manifest, ctx.force, |out| basis.write_csv(out))?;
    println!("{} states", basis.len());
    Ok(())
}
