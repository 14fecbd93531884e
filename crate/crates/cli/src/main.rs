//! `diode-hom`: runs the simulator from a JSON configuration and writes CSV,
//! JSON and a manifest into an output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diode_hom::analysis::{correct_dark_counts, g2_zero, peak_areas, visibility_from_areas, PeakAreaReport};
use diode_hom::config::RunConfig;
use diode_hom::dip::{delta_grid, dip_curve, fmt_sig};
use diode_hom::fit::{fit_dip, read_observations, FitOptions, Weighting};
use diode_hom::montecarlo::{simulate_hbt, simulate_hom, CorrelationHistogram};
use diode_hom::plot::emit_plot_data;
use diode_hom::relations::{dephasing_time, entanglement_criterion, fixed_bias_visibility};
use diode_hom::Result;
use serde_json::json;

const OUT_DIR_ENV: &str = "HOMSIM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "diode-hom",
    version,
    about = "Two-photon interference simulator for a Stark-gated quantum-dot source"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, default_value = "configs/measured.json")]
    config: PathBuf,
    /// Overrides `simulation.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `simulation.cycles`.
    #[arg(long, global = true)]
    cycles: Option<u64>,
    /// Output directory; falls back to $HOMSIM_OUT_DIR, then `outputs.dir`, then `out`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Drive voltage, Stark-shifted energy and the collection gate over one period.
    Waveform,
    /// Autocorrelation run and its g2(0).
    Hbt,
    /// Two-photon interference run through the interferometer.
    Hom(ModeArgs),
    /// Analytic central-peak area against the delay mismatch.
    Dip(ScanArgs),
    /// Monte Carlo central-peak area against the delay mismatch.
    DipMc(ScanArgs),
    /// Fits coherence time and jitter to a measured dip.
    Fit(FitArgs),
    /// Closed-form coherence relations and the entanglement criterion.
    Relations(RelationArgs),
    /// Flattens a result file into plot-ready CSV.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct ModeArgs {
    /// Cross-polarized control run.
    #[arg(long)]
    orthogonal: bool,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long, allow_hyphen_values = true)]
    delta_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta_max: Option<f64>,
    #[arg(long)]
    delta_step: Option<f64>,
    #[command(flatten)]
    mode: ModeArgs,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// CSV with `delta_ps,central_area[,weight]`.
    #[arg(long)]
    data: PathBuf,
    /// Starting coherence time, ps; defaults to the configured value.
    #[arg(long)]
    tau_c: Option<f64>,
    /// Starting jitter width, ps; defaults to the configured value.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    poisson: bool,
}

#[derive(Args, Debug)]
struct RelationArgs {
    /// Radiative lifetime, ps.
    #[arg(long)]
    t1: f64,
    /// Coherence time, ps.
    #[arg(long)]
    t2: f64,
    #[arg(long)]
    g2: Option<f64>,
    /// Visibility tested against the entanglement criterion.
    #[arg(long, default_value_t = 0.64)]
    visibility: f64,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
}

/// Files written by one run plus the manifest fields that describe it.
struct Run {
    out_dir: PathBuf,
    subcommand: &'static str,
    config_hash: Option<String>,
    seed: Option<u64>,
    cycles: Option<u64>,
    outputs: Vec<String>,
}

impl Run {
    fn new(out_dir: PathBuf, subcommand: &'static str) -> Result<Self> {
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self {
            out_dir,
            subcommand,
            config_hash: None,
            seed: None,
            cycles: None,
            outputs: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn record(&mut self, path: &Path) {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.outputs.push(name);
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, body)?;
        self.record(&path);
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn finish(self) -> Result<()> {
        let manifest = json!({
            "tool": "diode-hom",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "cycles": self.cycles,
            "outputs": self.outputs,
        });
        std::fs::write(
            self.out_dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(())
    }
}

struct Context {
    cfg: RunConfig,
    seed: u64,
    cycles: u64,
    out_dir: PathBuf,
}

fn out_dir(flag: Option<PathBuf>, cfg: Option<&RunConfig>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.and_then(|c| c.outputs.dir.as_ref()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load(cli: &Cli) -> Result<Context> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(cycles) = cli.cycles {
        cfg.simulation.cycles = cycles;
    }
    cfg.validate()?;
    Ok(Context {
        seed: cfg.simulation.seed,
        cycles: cfg.simulation.cycles,
        out_dir: out_dir(cli.out_dir.clone(), Some(&cfg)),
        cfg,
    })
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Relations(args) => relations(&cli, args),
        Command::Plot(args) => plot(&cli, args),
        command => {
            let ctx = load(&cli)?;
            match command {
                Command::Waveform => waveform(&ctx),
                Command::Hbt => hbt(&ctx),
                Command::Hom(mode) => hom(&ctx, mode),
                Command::Dip(scan) => dip(&ctx, scan),
                Command::DipMc(scan) => dip_mc(&ctx, scan),
                Command::Fit(args) => fit(&ctx, args),
                Command::Relations(_) | Command::Plot(_) => unreachable!("handled above"),
            }
        }
    }
}

fn started(ctx: &Context, subcommand: &'static str, stochastic: bool) -> Result<Run> {
    let mut run = Run::new(ctx.out_dir.clone(), subcommand)?;
    run.config_hash = Some(ctx.cfg.hash());
    if stochastic {
        run.seed = Some(ctx.seed);
        run.cycles = Some(ctx.cycles);
    }
    Ok(run)
}

fn waveform(ctx: &Context) -> Result<()> {
    let mut run = started(ctx, "waveform", false)?;
    let emitter = ctx.cfg.effective_emitter()?;
    let gate = ctx.cfg.gate()?;
    let mut csv = String::from("time_ps,voltage_v,energy_ev,detuning_mev\n");
    for (start, end, v) in ctx.cfg.waveform.spans() {
        for t in [start, end] {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                fmt_sig(t),
                fmt_sig(v),
                fmt_sig(emitter.stark_energy(v)),
                fmt_sig(emitter.detuning_mev(v))
            );
        }
    }
    run.write("waveform.csv", &csv)?;
    run.write_json(
        "gate.json",
        &json!({ "t_on": gate.t_on, "t_off": gate.t_off, "length": gate.length() }),
    )?;
    println!(
        "gate: [{}, {}] ps ({} ps)",
        fmt_sig(gate.t_on),
        fmt_sig(gate.t_off),
        fmt_sig(gate.length())
    );
    run.finish()
}

fn write_histogram(run: &mut Run, hist: &CorrelationHistogram, stem: &str, kind: &str) -> Result<()> {
    let (csv, json) = hist.write(&run.out_dir, stem, kind)?;
    run.record(&csv);
    run.record(&json);
    Ok(())
}

fn write_report(run: &mut Run, report: &PeakAreaReport, stem: &str) -> Result<()> {
    run.write(&format!("{stem}.csv"), &report.to_csv())?;
    let path = run.path(&format!("{stem}.json"));
    report.write_json(&path)?;
    run.record(&path);
    Ok(())
}

fn print_areas(report: &PeakAreaReport) {
    println!("{:>5}  {:>10}  {:>10}", "peak", "area", "sigma");
    for n in report.areas.keys() {
        println!(
            "{n:>5}  {:>10.4}  {:>10.4}",
            report.area(*n),
            report.area_uncertainty(*n)
        );
    }
}

fn hbt(ctx: &Context) -> Result<()> {
    let mut run = started(ctx, "hbt", true)?;
    let cfg = &ctx.cfg;
    let hist = simulate_hbt(&cfg.source_sim()?, &cfg.detector, ctx.cycles, ctx.seed)?;
    write_histogram(&mut run, &hist, "hbt_histogram", "hbt")?;
    let report = peak_areas(&hist, cfg.waveform.period(), cfg.window_half_width())?;
    write_report(&mut run, &report, "hbt_peaks")?;
    print_areas(&report);
    println!("g2(0) = {:.4} +/- {:.4}", g2_zero(&report), report.area_uncertainty(0));
    run.finish()
}

fn hom(ctx: &Context, mode: &ModeArgs) -> Result<()> {
    let mut run = started(ctx, "hom", true)?;
    let cfg = &ctx.cfg;
    let mz = cfg.interferometer(mode.orthogonal);
    let hist = simulate_hom(&cfg.source_sim()?, &mz, &cfg.detector, ctx.cycles, ctx.seed)?;
    write_histogram(&mut run, &hist, "hom_histogram", "hom")?;
    let report = peak_areas(&hist, cfg.waveform.period(), cfg.window_half_width())?;
    write_report(&mut run, &report, "hom_peaks")?;
    print_areas(&report);
    let raw = visibility_from_areas(&report);
    println!(
        "visibility (raw) = {:.4}{}",
        raw.value,
        if raw.clamped { " (clamped)" } else { "" }
    );
    if report.baseline_rate > 0.0 {
        let corrected = correct_dark_counts(&report)?;
        write_report(&mut run, &corrected, "hom_peaks_corrected")?;
        let v = visibility_from_areas(&corrected);
        println!(
            "visibility (corrected) = {:.4}{}",
            v.value,
            if v.clamped { " (clamped)" } else { "" }
        );
    }
    run.finish()
}

fn scan_grid(ctx: &Context, scan: &ScanArgs) -> Result<Vec<f64>> {
    let d = ctx.cfg.dip;
    delta_grid(
        scan.delta_min.unwrap_or(d.delta_min),
        scan.delta_max.unwrap_or(d.delta_max),
        scan.delta_step.unwrap_or(d.delta_step),
    )
}

fn dip(ctx: &Context, scan: &ScanArgs) -> Result<()> {
    let mut run = started(ctx, "dip", false)?;
    let model = ctx.cfg.dip_model(scan.mode.orthogonal)?;
    let curve = dip_curve(&scan_grid(ctx, scan)?, &model, &ctx.cfg.quadrature)?;
    run.write("dip.csv", &curve.to_csv())?;
    if let Some(a) = curve.area_at(0.0) {
        println!("central area at 0 ps = {:.4}, visibility = {:.4}", a, 1.0 - 2.0 * a);
    }
    run.finish()
}

fn dip_mc(ctx: &Context, scan: &ScanArgs) -> Result<()> {
    let mut run = started(ctx, "dip-mc", true)?;
    let cfg = &ctx.cfg;
    let source = cfg.source_sim()?;
    let period = cfg.waveform.period();
    let mut csv = String::from("delta_ps,central_area,central_area_err\n");
    for (i, delta) in scan_grid(ctx, scan)?.into_iter().enumerate() {
        let mut mz = cfg.interferometer(scan.mode.orthogonal);
        mz.delay = period - delta;
        let hist = simulate_hom(&source, &mz, &cfg.detector, ctx.cycles, ctx.seed.wrapping_add(i as u64))?;
        let report = peak_areas(&hist, period, cfg.window_half_width())?;
        let _ = writeln!(
            csv,
            "{},{},{}",
            fmt_sig(delta),
            fmt_sig(report.area(0)),
            fmt_sig(report.area_uncertainty(0))
        );
        println!(
            "{:>8}  {:.4} +/- {:.4}",
            fmt_sig(delta),
            report.area(0),
            report.area_uncertainty(0)
        );
    }
    run.write("dip_mc.csv", &csv)?;
    run.finish()
}

fn fit(ctx: &Context, args: &FitArgs) -> Result<()> {
    let mut run = started(ctx, "fit", false)?;
    let data = read_observations(&args.data)?;
    let (coherence, tau_c) = ctx.cfg.fit_coherence();
    let mut options = FitOptions::new(coherence);
    options.quad = ctx.cfg.quadrature;
    if args.poisson {
        options.weighting = Weighting::Poisson;
    }
    let geometry = ctx.cfg.dip_model(false)?;
    let initial = (args.tau_c.unwrap_or(tau_c), args.sigma.unwrap_or(ctx.cfg.jitter.sigma));
    let result = fit_dip(&data, initial, &geometry, &options)?;
    run.write_json("fit.json", &serde_json::to_value(&result)?)?;
    println!("{:<22}{:>12}{:>12}", "parameter", "value", "+/-");
    println!(
        "{:<22}{:>12.3}{:>12.3}",
        "tau_c (ps)", result.tau_c, result.tau_c_half_width
    );
    println!(
        "{:<22}{:>12.3}{:>12.3}",
        "sigma (ps)", result.sigma_jitter, result.sigma_half_width
    );
    println!("{:<22}{:>12.4}", "visibility at 0", result.visibility_at_zero);
    println!("{:<22}{:>12.3e}", "residual norm", result.residual_norm);
    println!("{:<22}{:>12}", "iterations", result.iterations);
    println!("{:<22}{:>12}", "converged", result.converged);
    if result.tau_c_pinned || result.sigma_pinned {
        println!(
            "pinned at a bound: tau_c {}, sigma {}",
            result.tau_c_pinned, result.sigma_pinned
        );
    }
    if result.degenerate {
        println!("warning: the data do not constrain both parameters");
    }
    run.finish()
}

fn relations(cli: &Cli, args: &RelationArgs) -> Result<()> {
    let mut run = Run::new(out_dir(cli.out_dir.clone(), None), "relations")?;
    let t2_star = dephasing_time(args.t1, args.t2)?;
    let v_fixed = fixed_bias_visibility(args.t1, args.t2)?;
    println!("T2* = {} ps", fmt_sig((t2_star * 10.0).round() / 10.0));
    println!("fixed-bias visibility T2/2T1 = {}", fmt_sig(v_fixed));
    let criterion = args.g2.map(|g2| entanglement_criterion(args.visibility, g2));
    if let (Some(g2), Some(ok)) = (args.g2, criterion) {
        println!(
            "entanglement criterion V = {} > 2 g2(0) = {}: {}",
            fmt_sig(args.visibility),
            fmt_sig(2.0 * g2),
            if ok { "fulfilled" } else { "not fulfilled" }
        );
    }
    run.write_json(
        "relations.json",
        &json!({
            "t1": args.t1,
            "t2": args.t2,
            "dephasing_time": t2_star,
            "fixed_bias_visibility": v_fixed,
            "g2_zero": args.g2,
            "visibility": args.visibility,
            "criterion_fulfilled": criterion,
        }),
    )?;
    run.finish()
}

fn plot(cli: &Cli, args: &PlotArgs) -> Result<()> {
    let mut run = Run::new(out_dir(cli.out_dir.clone(), None), "plot")?;
    let path = emit_plot_data(&args.input, &run.out_dir)?;
    run.record(&path);
    println!("{}", path.display());
    run.finish()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
