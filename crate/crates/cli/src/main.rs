use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ripplecorr::cycles::{
    external_stimuli, freq_avg_phases, lag_correlation, long_period, mode_phases, moving_average,
    KSet,
};
use ripplecorr::genuine::genuine_matrix;
use ripplecorr::nullmodel::{
    autocorrelation, count_significant, no_autocorr_band, null_ensemble, upper_edge, ShuffleMode,
    DEFAULT_CONFIDENCE, DEFAULT_SAMPLES,
};
use ripplecorr::panel::{
    growth_rates, load_panel, load_weights, read_panel, standardize, write_panel, GrowthMethod,
    Panel, SeriesId, StandardizedPanel, Variable, Window,
};
use ripplecorr::response::{
    final_to_intermediate, reduced_susceptibility, ripple, write_final_to_intermediate_csv,
};
use ripplecorr::spectral::{
    correlation_matrix, display_histogram, eigendecompose, mode_series, CorrMatrix, ModeBasis,
    MpParams,
};
use ripplecorr::synth::{realize, to_levels, SynthSpec};

mod output;

use output::Run;

const DEFAULT_WINDOW: &str = "1988-01:2007-12";
const OUT_ENV: &str = "RIPPLECORR_OUT";

#[derive(Parser)]
#[command(name = "ripplecorr", version, about = "Correlation denoising and linear-response analysis of index panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Serialize)]
struct PanelArgs {
    /// Panel CSV (`date,P.1,...`), or `-` for standard input
    #[arg(long, short)]
    input: String,
    /// Analysis window `YYYY-MM:YYYY-MM`
    #[arg(long, default_value = DEFAULT_WINDOW)]
    window: Window,
    /// Growth-rate definition: log10 or simple
    #[arg(long, default_value = "log10")]
    growth: GrowthMethod,
    /// Optional `goods,weight` CSV
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args, Clone, Serialize)]
struct OutArgs {
    /// Output directory
    #[arg(long, env = OUT_ENV, default_value = "ripplecorr-out")]
    out: PathBuf,
}

#[derive(Args, Clone, Serialize)]
struct NullArgs {
    /// Null-ensemble size
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Master seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Clone, Serialize)]
struct ModesArgs {
    /// Significant mode count; estimated against the rotational-shuffle edge when absent
    #[arg(long)]
    k: Option<usize>,
    #[command(flatten)]
    null: NullArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Check a panel file and report its shape
    Validate {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Eigenvalues, eigenvectors and the MP overlay of the correlation matrix
    Analyze {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Shuffling null ensemble and its significance edge
    Null {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        out: OutArgs,
        /// complete or rotational
        #[arg(long, default_value = "rotational")]
        mode: ShuffleMode,
        #[command(flatten)]
        null: NullArgs,
        /// Confidence of the edge interval
        #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
        confidence: f64,
    },
    /// Noise-filtered correlation matrix from the significant modes
    Genuine {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        modes: ModesArgs,
    },
    /// Ripple effects of a unit shift, or the final-demand to producer-goods table
    Ripple {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        modes: ModesArgs,
        /// Source series such as `S.9`; the producer-goods table is written when absent
        #[arg(long)]
        source: Option<SeriesId>,
        /// Applied shift in standardized units
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        shift: f64,
    },
    /// Reduced susceptibility of the leading modes
    ReducedChi {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Modes kept in the genuine matrix and in the reduced space
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
    /// Smoothed mode coefficients and their lag correlation
    Cycles {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Moving-average half-width in months
        #[arg(long, default_value_t = 6)]
        xi: usize,
        /// Largest |lag| in months
        #[arg(long, default_value_t = 24)]
        max_lag: usize,
        /// Frequency set of the long-period component: cycles, long, or a list
        #[arg(long, default_value = "cycles", value_parser = valid::<KSet>)]
        kset: String,
    },
    /// Phase tables at one frequency and averaged over a frequency set
    Phases {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Frequency index of the single-period table (4 is T=60 for 240 months)
        #[arg(long, default_value_t = 4)]
        frequency: usize,
        /// Frequency set of the averaged table: cycles, long, or a list
        #[arg(long, default_value = "long", value_parser = valid::<KSet>)]
        kset: String,
        /// Reference series
        #[arg(long, default_value = "P.20")]
        reference: SeriesId,
    },
    /// External stimuli recovered from residual fluctuations
    Stimuli {
        #[command(flatten)]
        panel: PanelArgs,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long, default_value_t = 6)]
        xi: usize,
        #[arg(long, default_value = "cycles", value_parser = valid::<KSet>)]
        kset: String,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Modes kept in the genuine matrix
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Synthetic panel with planted modes
    Synth {
        #[command(flatten)]
        out: OutArgs,
        /// TOML generator spec; white noise of the given shape when absent
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 63)]
        m: usize,
        #[arg(long, default_value_t = 239)]
        n_prime: usize,
        /// Overrides the seed in the TOML file
        #[arg(long)]
        seed: Option<u64>,
        /// Base-10 log growth per standardized unit
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        /// Write the panel CSV to standard output instead of the output directory
        #[arg(long)]
        stdout: bool,
    },
}

fn valid<T: std::str::FromStr>(s: &str) -> std::result::Result<String, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn kset(s: &str) -> Result<Vec<usize>> {
    Ok(s.parse::<KSet>()?.indices())
}

fn load(args: &PanelArgs) -> Result<Panel> {
    let panel = if args.input == "-" {
        read_panel(std::io::stdin().lock(), Some(args.window)).context("reading standard input")?
    } else {
        load_panel(&args.input, Some(args.window)).with_context(|| format!("reading {}", args.input))?
    };
    Ok(match &args.weights {
        Some(p) => panel.with_weights(load_weights(p).with_context(|| format!("reading {}", p.display()))?),
        None => panel,
    })
}

struct Pipeline {
    w: StandardizedPanel,
    c: CorrMatrix,
    b: ModeBasis,
}

fn pipeline(args: &PanelArgs) -> Result<Pipeline> {
    let panel = load(args)?;
    let w = standardize(&growth_rates(&panel, args.growth))?;
    let c = correlation_matrix(&w);
    let b = eigendecompose(&c)?;
    Ok(Pipeline { w, c, b })
}

/// Explicit `k`, or the count above the rotational-shuffle edge.
fn significant_modes(p: &Pipeline, modes: &ModesArgs) -> Result<(usize, Option<f64>)> {
    if let Some(k) = modes.k {
        return Ok((k, None));
    }
    let e = null_ensemble(&p.w, ShuffleMode::Rotational, modes.null.samples, modes.null.seed)?;
    Ok((count_significant(&p.b, e.edge.center), Some(e.edge.center)))
}

#[derive(Serialize)]
struct Config<'a, T: Serialize> {
    command: &'a str,
    #[serde(flatten)]
    args: T,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { panel, out } => {
            let p = load(&panel)?;
            let w = standardize(&growth_rates(&p, panel.growth))?;
            let mut run = Run::new(&out.out, &Config { command: "validate", args: &panel }, None)?;
            println!(
                "ok: {} series, {} months ({} to {}), {} growth rates",
                p.series_count(),
                p.len(),
                p.months()[0],
                p.months()[p.len() - 1],
                w.len()
            );
            run.note("series", p.series_count());
            run.note("months", p.len());
            run.finish()
        }
        Command::Analyze { panel, out } => {
            let p = pipeline(&panel)?;
            let mut run = Run::new(&out.out, &Config { command: "analyze", args: &panel }, None)?;
            let ev = p.b.eigenvalues();
            run.csv("eigenvalues.csv", |f| {
                writeln!(f, "n,eigenvalue")?;
                for (n, l) in ev.iter().enumerate() {
                    writeln!(f, "{},{l}", n + 1)?;
                }
                Ok(())
            })?;
            let mp = MpParams::from_shape(p.w.len(), p.w.series_count()).ok();
            let hist = display_histogram(ev)?;
            run.csv("histogram.csv", |f| {
                writeln!(f, "lambda,density,mp_density")?;
                for (x, d) in hist.centers().iter().zip(&hist.density) {
                    let m = mp.map(|mp| mp.density(*x).to_string()).unwrap_or_default();
                    writeln!(f, "{x},{d},{m}")?;
                }
                Ok(())
            })?;
            if let Some(mp) = mp {
                run.note("mp_lower", mp.lower);
                run.note("mp_upper", mp.upper);
            }
            run.csv("modes.csv", |f| Ok(p.b.write_csv(f)?))?;
            run.csv("correlation.csv", |f| Ok(p.c.write_csv(f)?))?;
            run.json("basis.json", &serde_json::from_str::<serde_json::Value>(&p.b.to_json()?)?)?;
            let ms = mode_series(&p.w, &p.b)?;
            run.csv("mode_series.csv", |f| {
                let k = ms.mode_count().min(5);
                let cols: Vec<String> = (1..=k).map(|n| format!("a{n}")).collect();
                writeln!(f, "date,{}", cols.join(","))?;
                for (t, d) in ms.months().iter().enumerate() {
                    let vals: Vec<String> = (0..k).map(|n| ms.coefficients()[(n, t)].to_string()).collect();
                    writeln!(f, "{d},{}", vals.join(","))?;
                }
                Ok(())
            })?;
            run.finish()
        }
        Command::Null { panel, out, mode, null, confidence } => {
            let p = pipeline(&panel)?;
            #[derive(Serialize)]
            struct A<'a> {
                #[serde(flatten)]
                panel: &'a PanelArgs,
                mode: ShuffleMode,
                #[serde(flatten)]
                null: &'a NullArgs,
                confidence: f64,
            }
            let cfg = Config { command: "null", args: A { panel: &panel, mode, null: &null, confidence } };
            let mut run = Run::new(&out.out, &cfg, Some(null.seed))?;
            let mut e = null_ensemble(&p.w, mode, null.samples, null.seed)?;
            e.edge = upper_edge(&e, confidence)?;
            let significant = count_significant(&p.b, e.edge.center);
            run.json("null.json", &serde_json::from_str::<serde_json::Value>(&e.to_json()?)?)?;
            run.csv("pooled.csv", |f| Ok(e.write_pooled_csv(f)?))?;
            let band = no_autocorr_band(p.w.len(), confidence)?;
            run.csv("autocorrelation.csv", |f| {
                let lags: Vec<String> = (1..=12).map(|m| format!("r{m}")).collect();
                writeln!(f, "series,{},band", lags.join(","))?;
                for (l, id) in p.w.ids().iter().enumerate() {
                    let r: Vec<String> = (1..=12.min(p.w.len().saturating_sub(2)))
                        .map(|m| autocorrelation(&p.w, l + 1, m).map(|v| v.to_string()))
                        .collect::<ripplecorr::Result<_>>()?;
                    writeln!(f, "{id},{},{band}", r.join(","))?;
                }
                Ok(())
            })?;
            println!(
                "edge {:.4} [{:.4}, {:.4}], {significant} eigenvalues above",
                e.edge.center, e.edge.low, e.edge.high
            );
            run.note("significant", significant);
            run.finish()
        }
        Command::Genuine { panel, out, modes } => {
            let p = pipeline(&panel)?;
            #[derive(Serialize)]
            struct A<'a> {
                #[serde(flatten)]
                panel: &'a PanelArgs,
                #[serde(flatten)]
                modes: &'a ModesArgs,
            }
            let cfg = Config { command: "genuine", args: A { panel: &panel, modes: &modes } };
            let mut run = Run::new(&out.out, &cfg, Some(modes.null.seed))?;
            let (k, edge) = significant_modes(&p, &modes)?;
            let cg = genuine_matrix(&p.b, k)?;
            for w in cg.warnings() {
                eprintln!("warning: {w}");
            }
            run.csv("genuine.csv", |f| Ok(cg.write_csv(f)?))?;
            run.json("genuine.json", &serde_json::from_str::<serde_json::Value>(&cg.to_json()?)?)?;
            run.note("k", k);
            if let Some(e) = edge {
                run.note("rotational_edge", e);
            }
            println!("genuine matrix with k = {k}");
            run.finish()
        }
        Command::Ripple { panel, out, modes, source, shift } => {
            let p = pipeline(&panel)?;
            #[derive(Serialize)]
            struct A<'a> {
                #[serde(flatten)]
                panel: &'a PanelArgs,
                #[serde(flatten)]
                modes: &'a ModesArgs,
                source: Option<SeriesId>,
                shift: f64,
            }
            let cfg = Config { command: "ripple", args: A { panel: &panel, modes: &modes, source, shift } };
            let mut run = Run::new(&out.out, &cfg, Some(modes.null.seed))?;
            let (k, _) = significant_modes(&p, &modes)?;
            let cg = genuine_matrix(&p.b, k)?;
            run.note("k", k);
            match source {
                Some(id) => {
                    let r = ripple(&cg, id, shift)?;
                    run.csv("ripple.csv", |f| Ok(r.write_csv(f)?))?;
                }
                None => {
                    let g = final_to_intermediate(&cg)?;
                    let raw = final_to_intermediate(&p.c)?;
                    run.csv("final_to_intermediate.csv", |f| {
                        Ok(write_final_to_intermediate_csv(&g, Some(&raw), f)?)
                    })?;
                }
            }
            run.finish()
        }
        Command::ReducedChi { panel, out, k, beta } => {
            let p = pipeline(&panel)?;
            #[derive(Serialize)]
            struct A<'a> {
                #[serde(flatten)]
                panel: &'a PanelArgs,
                k: usize,
                beta: f64,
            }
            let cfg = Config { command: "reduced-chi", args: A { panel: &panel, k, beta } };
            let mut run = Run::new(&out.out, &cfg, None)?;
            let cg = genuine_matrix(&p.b, k)?;
            let chi = reduced_susceptibility(&cg, &p.b, k, beta)?;
            run.json("reduced_chi.json", &serde_json::from_str::<serde_json::Value>(&chi.to_json()?)?)?;
            let norm = chi.normalized();
            run.csv("reduced_chi.csv", |f| {
                writeln!(f, "m,n,chi,normalized")?;
                for i in 0..chi.dim() {
                    for j in 0..chi.dim() {
                        writeln!(f, "{},{},{},{}", i + 1, j + 1, chi.values[(i, j)], norm[(i, j)])?;
                    }
                }
                Ok(())
            })?;
            run.finish()
        }
        Command::Cycles { panel, out, xi, max_lag, kset: ks } => {
            let p = pipeline(&panel)?;
            #[derive(Serialize)]
            struct A<'a> {
                #[serde(flatten)]
                panel: &'a PanelArgs,
                xi: usize,
                max_lag: usize,
                kset: &'a str,
            }
            let cfg = Config { command: "cycles", args: A { panel: &panel, xi, max_lag, kset: &ks } };
            let mut run = Run::new(&out.out, &cfg, None)?;
            let ks = kset(&ks)?;
            let ms = mode_series(&p.w, &p.b)?;
            if ms.mode_count() < 2 {
                bail!("at least two modes are needed, the panel has {}", ms.mode_count());
            }
            let (a1, a2) = (ms.mode(1)?, ms.mode(2)?);
            let (s1, s2) = (moving_average(&a1, xi)?.values, moving_average(&a2, xi)?.values);
            let (l1, l2) = (long_period(&a1, &ks)?, long_period(&a2, &ks)?);
            run.csv("smoothed.csv", |f| {
                writeln!(f, "date,a1,a2,a1_smooth,a2_smooth,a1_long,a2_long")?;
                for (t, d) in ms.months().iter().enumerate() {
                    writeln!(f, "{d},{},{},{},{},{},{}", a1[t], a2[t], s1[t], s2[t], l1[t], l2[t])?;
                }
                Ok(())
            })?;
            let max_lag = max_lag.min(a1.len().saturating_sub(2)) as i64;
            let mut peak = (f64::NEG_INFINITY, 0);
            let mut rows = Vec::new();
            for tau in -max_lag..=max_lag {
                let r = lag_correlation(&a1, &a2, tau, xi)?;
                if r > peak.0 {
                    peak = (r, tau);
                }
                rows.push((tau, r));
            }
            run.csv("lag_correlation.csv", |f| {
                writeln!(f, "tau,correlation")?;
                for (tau, r) in &rows {
                    writeln!(f, "{tau},{r}")?;
                }
                Ok(())
            })?;
            println!("lag correlation peaks at {:.3} for tau = {}", peak.0, peak.1);
            run.note("peak_correlation", peak.0);
            run.note("peak_lag", peak.1);
            run.finish()
        }
        Command::Phases { panel, out, frequency, kset: ks, reference } => {
            let p = pipeline(&panel)?;
            #[derive(Serialize)]
            struct A<'a> {
                #[serde(flatten)]
                panel: &'a PanelArgs,
                frequency: usize,
                kset: &'a str,
                reference: SeriesId,
            }
            let cfg = Config { command: "phases", args: A { panel: &panel, frequency, kset: &ks, reference } };
            let mut run = Run::new(&out.out, &cfg, None)?;
            let ks = kset(&ks)?;
            let ms = mode_series(&p.w, &p.b)?;
            let single = mode_phases(&ms, &p.b, frequency, reference)?;
            let avg = freq_avg_phases(&ms, &p.b, &ks, reference)?;
            run.csv(&format!("phases_k{frequency}.csv"), |f| Ok(single.write_csv(f)?))?;
            run.csv("phases_averaged.csv", |f| Ok(avg.write_csv(f)?))?;
            for alpha in Variable::ALL {
                if let (Some(a), Some(b)) = (single.variable_mean(alpha), avg.variable_mean(alpha)) {
                    println!("{}: {} mean {a:.1}, averaged mean {b:.1}", alpha.code(), single.label);
                }
            }
            run.finish()
        }
        Command::Stimuli { panel, out, xi, kset: ks, beta, k } => {
            let p = pipeline(&panel)?;
            #[derive(Serialize)]
            struct A<'a> {
                #[serde(flatten)]
                panel: &'a PanelArgs,
                xi: usize,
                kset: &'a str,
                beta: f64,
                k: usize,
            }
            let cfg = Config { command: "stimuli", args: A { panel: &panel, xi, kset: &ks, beta, k } };
            let mut run = Run::new(&out.out, &cfg, None)?;
            let ks = kset(&ks)?;
            let ms = mode_series(&p.w, &p.b)?;
            let cg = genuine_matrix(&p.b, k)?;
            let chi = reduced_susceptibility(&cg, &p.b, k.max(2), beta)?;
            let s = external_stimuli(&ms, &p.b, &chi, xi, &ks)?;
            run.csv("stimuli.csv", |f| Ok(s.write_csv(f)?))?;
            let (e1, e2) = s.max_abs();
            println!("max |eta1| = {e1:.4}, max |eta2| = {e2:.4}");
            run.note("max_eta1", e1);
            run.note("max_eta2", e2);
            run.finish()
        }
        Command::Synth { out, spec, m, n_prime, seed, scale, stdout } => {
            let mut s = match &spec {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    SynthSpec::from_toml(&text)?
                }
                None => SynthSpec::iid(m, n_prime, 1),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            #[derive(Serialize)]
            struct A<'a> {
                spec: &'a SynthSpec,
                scale: f64,
            }
            let cfg = Config { command: "synth", args: A { spec: &s, scale } };
            let seed = s.seed;
            let mut run = Run::new(&out.out, &cfg, Some(seed))?;
            let r = realize(&s)?;
            let levels = to_levels(&r.panel, scale)?;
            let preamble = vec![run.header().to_string()];
            if stdout {
                let lock = std::io::stdout().lock();
                write_panel(&levels, lock, &preamble)?;
            } else {
                run.raw("panel.csv", |f| Ok(write_panel(&levels, f, &preamble)?))?;
            }
            run.raw("spec.toml", |f| {
                f.write_all(s.to_toml()?.as_bytes())?;
                Ok(())
            })?;
            run.finish()
        }
    }
}
