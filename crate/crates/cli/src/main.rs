//! `immunet` command-line front end.
//!
//! Settings resolve as flag, then config file, then built-in default. Every
//! output file opens with a `#` comment block holding the resolved settings.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use immunet::analyze::{analyze_records, AnalyzeConfig};
use immunet::entropy::entropy_series;
use immunet::forecast::fit_parameters;
use immunet::netsim::{
    PairOutcome, PairSelection, ResponseMode, SimConfig, SimWorld, SweepAxis, SweepSpec, SweepTable,
};
use immunet::traffic::{parse_trace, window_packets, OnMalformed, PacketRecord, TraceFormat};

const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Observation size for trace commands unless configured otherwise.
const TRACE_PACKETS_PER_OBS: usize = 2000;

#[derive(Parser, Debug)]
#[command(name = "immunet", version, about = "Entropy-based flood detection and immune-agent simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect anomalies in a packet trace and name suspect flows.
    Analyze {
        trace: PathBuf,
        /// Skip malformed lines instead of failing.
        #[arg(long)]
        skip_malformed: bool,
        #[command(flatten)]
        shared: Shared,
    },
    /// Run one simulation and write its metrics and event log.
    Simulate {
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Run paired innate/adaptive simulations over a network population.
    Sweep {
        /// location, power, congestion or pathlen; comma-separated for several.
        #[arg(long, value_delimiter = ',', required = true)]
        axis: Vec<SweepAxis>,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long)]
        grid: Option<String>,
        /// Number of seeded networks.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// `all` or the number of sampled pairs per network.
        #[arg(long, default_value = "all")]
        pairs: PairSelection,
        /// Node-count range `lo:hi` spread across the networks.
        #[arg(long, default_value = "8:40")]
        nodes: String,
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        shared: Shared,
    },
    /// Fit smoothing parameters to the entropy series of a trace.
    Fit {
        trace: PathBuf,
        #[command(flatten)]
        shared: Shared,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct Shared {
    /// `key=value` settings file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "immunet-out")]
    out: PathBuf,
    #[arg(long)]
    renyi_alpha: Option<f64>,
    #[arg(long)]
    packets_per_obs: Option<usize>,
    #[arg(long)]
    window_n: Option<usize>,
    #[arg(long)]
    hw_season: Option<usize>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    quarantine_q: Option<usize>,
    #[arg(long)]
    mode: Option<ResponseMode>,
    /// Any other setting, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Shared {
    /// Defaults, then `base` adjustments, then the config file, then flags.
    fn resolve(&self, base: &[(&str, String)]) -> Result<SimConfig> {
        let mut cfg = SimConfig::default();
        for (k, v) in base {
            cfg.set(k, v)?;
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_text(&text)
                .with_context(|| format!("in config {}", path.display()))?;
        }
        let mut flags: Vec<(&str, String)> = Vec::new();
        if let Some(v) = self.seed {
            flags.push(("seed", v.to_string()));
        }
        if let Some(v) = self.renyi_alpha {
            flags.push(("renyi_alpha", v.to_string()));
        }
        if let Some(v) = self.packets_per_obs {
            flags.push(("packets_per_obs", v.to_string()));
        }
        if let Some(v) = self.window_n {
            flags.push(("window_n", v.to_string()));
        }
        if let Some(v) = self.hw_season {
            flags.push(("hw_season", v.to_string()));
        }
        if let Some(v) = self.confidence {
            flags.push(("confidence", v.to_string()));
        }
        if let Some(v) = self.quarantine_q {
            flags.push(("quarantine_q", v.to_string()));
        }
        if let Some(v) = self.mode {
            flags.push(("mode", v.to_string()));
        }
        for (k, v) in &flags {
            cfg.set(k, v).with_context(|| format!("flag --{}", k.replace('_', "-")))?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k.trim(), v.trim()).with_context(|| format!("--set {kv}"))?;
        }
        Ok(cfg)
    }
}

/// Comment block opening every output file.
fn provenance(command: &str, cfg: &SimConfig, extra: &[(&str, String)]) -> String {
    let mut s = format!("# immunet {VERSION}\n# command: {command}\n# seed: {}\n", cfg.seed);
    for (k, v) in extra {
        s.push_str(&format!("# {k}: {v}\n"));
    }
    s.push_str("# config:\n");
    for line in cfg.to_lines() {
        s.push_str(&format!("#   {line}\n"));
    }
    s
}

fn write_output(dir: &Path, name: &str, header: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, format!("{header}{body}")).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn read_trace(path: &Path, skip_malformed: bool) -> Result<Vec<PacketRecord>> {
    let file = fs::File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
    let policy = if skip_malformed {
        OnMalformed::SkipAndCount
    } else {
        OnMalformed::Abort
    };
    let parsed = parse_trace(BufReader::new(file), TraceFormat::V1, policy)
        .with_context(|| format!("parsing trace {}", path.display()))?;
    if !parsed.skipped.is_empty() {
        eprintln!("warning: skipped {} malformed lines", parsed.skipped.len());
    }
    Ok(parsed.records)
}

fn trace_defaults() -> Vec<(&'static str, String)> {
    vec![("packets_per_obs", TRACE_PACKETS_PER_OBS.to_string())]
}

/// Parses `start:stop:step` (inclusive) or `a,b,c`.
fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |x: &str| -> Result<f64> {
        x.trim().parse::<f64>().with_context(|| format!("bad grid value {x:?}"))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, d) = (num(start)?, num(stop)?, num(step)?);
            if !(d > 0.0) || b < a {
                bail!("grid {s:?} needs start <= stop and a positive step");
            }
            let n = ((b - a) / d + 1e-9).floor() as usize;
            // snap to the step's decimal resolution to avoid 0.30000000000000004
            Ok((0..=n).map(|i| ((a + i as f64 * d) * 1e9).round() / 1e9).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => bail!("grid {s:?} must be start:stop:step or a comma-separated list"),
    }
}

fn default_grid(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::Power => "0.1:1.0:0.1",
        SweepAxis::Congestion => "0.1:0.5:0.1",
        SweepAxis::Location | SweepAxis::PathLength => "0.30:0.40:0.05",
    }
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s.split_once(':').with_context(|| format!("node range {s:?} must be lo:hi"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn analyze(trace: &Path, skip_malformed: bool, shared: &Shared) -> Result<ExitCode> {
    let cfg = shared.resolve(&trace_defaults())?;
    let records = read_trace(trace, skip_malformed)?;
    let acfg = AnalyzeConfig {
        packets_per_obs: cfg.packets_per_obs,
        renyi_alpha: cfg.agent.renyi_alpha,
        detector: cfg.agent.detector,
        identify: cfg.agent.identify,
    };
    let result = analyze_records(&records, &acfg)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let header = provenance("analyze", &cfg, &[("trace", trace.display().to_string())]);
    write_output(&shared.out, "verdicts.csv", &header, &result.verdicts_csv())?;
    write_output(&shared.out, "alerts.csv", &header, &result.alerts_csv())?;
    println!(
        "{} packets, {} observations, {} verdicts, {} alerts",
        result.packets,
        result.entropy.len(),
        result.verdicts.len(),
        result.alerts.len()
    );
    Ok(if result.alerts.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn simulate(steps: Option<usize>, shared: &Shared) -> Result<ExitCode> {
    let mut cfg = shared.resolve(&[])?;
    if let Some(s) = steps {
        cfg.steps = s;
    }
    let mut world = SimWorld::new(&cfg)?;
    world.run_to_end()?;
    let report = world.report();
    let header = provenance("simulate", &cfg, &[]);
    let mode = cfg.mode.as_str();
    write_output(&shared.out, &format!("metrics_{mode}.csv"), &header, &report.to_csv())?;
    write_output(&shared.out, &format!("events_{mode}.csv"), &header, &world.event_log())?;
    let rate = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
    println!(
        "{mode}: {} steps, attack {}->{}, tpr {}, fpr {}, blocked {}",
        report.steps_run,
        report.source,
        report.target,
        rate(report.tpr()),
        rate(report.fpr()),
        report.blocked().map_or("n/a", |b| if b { "yes" } else { "no" })
    );
    Ok(ExitCode::SUCCESS)
}

fn pairs_csv(outcomes: &[PairOutcome]) -> String {
    let mut s = format!("network,legit_volume,{}\n", immunet::netsim::MetricsReport::header());
    for o in outcomes {
        for mode in [ResponseMode::Innate, ResponseMode::Adaptive] {
            s.push_str(&format!("{},{:.6},{}\n", o.network, o.legit_volume, o.report(mode).row()));
        }
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    axes: &[SweepAxis],
    grid: Option<&str>,
    seeds: usize,
    pairs: PairSelection,
    nodes: &str,
    steps: Option<usize>,
    shared: &Shared,
) -> Result<ExitCode> {
    let mut base = shared.resolve(&[])?;
    if let Some(s) = steps {
        base.steps = s;
    }
    base.validate()?;
    let node_range = Some(parse_range(nodes)?);
    let mut done: Vec<(SweepAxis, Vec<f64>, Vec<PairOutcome>)> = Vec::new();
    for &axis in axes {
        let grid_text = grid.unwrap_or(default_grid(axis));
        let values = parse_grid(grid_text)?;
        let spec = SweepSpec {
            base: base.clone(),
            axis,
            grid: values.clone(),
            networks: seeds,
            node_range,
            pairs,
        };
        // location and path length share their runs
        let shared_runs = |a: SweepAxis| matches!(a, SweepAxis::Location | SweepAxis::PathLength);
        let reuse = done
            .iter()
            .find(|(a, g, _)| shared_runs(*a) && shared_runs(axis) && *g == values)
            .map(|(_, _, o)| o.clone());
        let outcomes = match reuse {
            Some(o) => o,
            None => immunet::netsim::run_pairs(&spec)?,
        };
        let table = SweepTable::from_outcomes(axis, &values, &outcomes);
        let header = provenance(
            "sweep",
            &base,
            &[
                ("axis", axis.as_str().to_string()),
                ("grid", grid_text.to_string()),
                ("seeds", seeds.to_string()),
                ("pairs", pairs.to_string()),
                ("nodes", nodes.to_string()),
            ],
        );
        let path = write_output(&shared.out, axis.file_name(), &header, &table.to_csv())?;
        write_output(
            &shared.out,
            &format!("pairs_{}.csv", axis.as_str()),
            &header,
            &pairs_csv(&outcomes),
        )?;
        println!("{}: {} paired runs -> {}", axis.as_str(), outcomes.len(), path.display());
        done.push((axis, values, outcomes));
    }
    Ok(ExitCode::SUCCESS)
}

fn fit(trace: &Path, shared: &Shared) -> Result<ExitCode> {
    let cfg = shared.resolve(&trace_defaults())?;
    let records = read_trace(trace, false)?;
    let obs = window_packets(&records, cfg.packets_per_obs)?;
    let series: Vec<f64> = entropy_series(&obs, cfg.agent.renyi_alpha)?
        .iter()
        .map(|p| p.value)
        .collect();
    let l = cfg.agent.detector.season_len;
    let fitted = fit_parameters(&series, l).with_context(|| {
        format!(
            "trace gives {} observations of {} packets; fitting with season {l} needs at least {}",
            series.len(),
            cfg.packets_per_obs,
            3 * l
        )
    })?;
    let p = fitted.params;
    let body = format!(
        "alpha={}\nbeta={}\ngamma={}\nsse={}\nobservations={}\n",
        p.alpha,
        p.beta,
        p.gamma,
        fitted.sse,
        series.len()
    );
    let header = provenance("fit", &cfg, &[("trace", trace.display().to_string())]);
    write_output(&shared.out, "fit.txt", &header, &body)?;
    print!("{body}");
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Analyze {
            trace,
            skip_malformed,
            shared,
        } => analyze(trace, *skip_malformed, shared),
        Command::Simulate { steps, shared } => simulate(*steps, shared),
        Command::Sweep {
            axis,
            grid,
            seeds,
            pairs,
            nodes,
            steps,
            shared,
        } => sweep(axis, grid.as_deref(), *seeds, *pairs, nodes, *steps, shared),
        Command::Fit { trace, shared } => fit(trace, shared),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
