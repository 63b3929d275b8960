//! Experiment execution: evaluates scenario grids analytically (and by
//! simulation when asked), renders rows in a fixed CSV dialect, and distills
//! a human-readable summary.
//!
//! CSV dialect: comma separators, `.` decimals, one header row, `#`-prefixed
//! metadata lines before the header. Statistics that do not exist for an
//! unstable queue are rendered as the literal token `divergent`, never as a
//! number. Floats are written in Rust's shortest round-trip form, so a
//! written file reparses to bit-identical rows.

use std::fmt;

use rayon::prelude::*;
use relay_mpr::channel::{RelayInterferenceConvention, SymmetricLinkParams};
use relay_mpr::queue::QueueCharacterization;
use relay_mpr::sim::{self, SimConfig, SimScenario};
use relay_mpr::symmetric::SymmetricScenario;
use relay_mpr::two_user::TwoUserScenario;
use relay_mpr::Error as LibError;

use crate::config::{ExperimentConfig, Mode, Preset, ScenarioSpec, SweepAxis};

pub const DIVERGENT: &str = "divergent";

const GAMMA_FAMILY: [f64; 4] = [0.5, 0.8, 1.2, 2.5];

#[derive(Debug)]
pub enum RunError {
    Model(LibError),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Model(e) => write!(f, "model error: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<LibError> for RunError {
    fn from(e: LibError) -> Self {
        RunError::Model(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// Empirical columns attached by `mode = simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimColumns {
    pub prob_empty: f64,
    pub prob_empty_se: f64,
    pub mean_queue: f64,
    pub mean_queue_se: f64,
    pub lambda: f64,
    pub lambda_se: f64,
    pub mu: f64,
    pub mu_se: f64,
    pub throughput_per_user: f64,
    pub throughput_per_user_se: f64,
    pub aggregate: f64,
    pub aggregate_se: f64,
    pub slots: u64,
    pub warmup: u64,
    pub replications: u32,
    pub seed: u64,
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub q: f64,
    pub q0: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda: f64,
    pub mu: f64,
    pub q0min: f64,
    pub stable: bool,
    pub prob_empty: Option<f64>,
    pub mean_queue: Option<f64>,
    pub throughput_per_user: Option<f64>,
    pub aggregate: Option<f64>,
    pub no_relay_per_user: f64,
    pub no_relay_aggregate: f64,
    pub relay_gain: Option<f64>,
    pub sim: Option<SimColumns>,
}

pub const ANALYTIC_HEADER: [&str; 18] = [
    "n",
    "q",
    "q0",
    "gamma",
    "alpha",
    "lambda0",
    "lambda1",
    "lambda",
    "mu",
    "q0min",
    "stable",
    "prob_empty",
    "mean_queue",
    "throughput_per_user",
    "aggregate",
    "no_relay_per_user",
    "no_relay_aggregate",
    "relay_gain",
];

pub const SIM_HEADER: [&str; 16] = [
    "sim_prob_empty",
    "sim_prob_empty_se",
    "sim_mean_queue",
    "sim_mean_queue_se",
    "sim_lambda",
    "sim_lambda_se",
    "sim_mu",
    "sim_mu_se",
    "sim_throughput_per_user",
    "sim_throughput_per_user_se",
    "sim_aggregate",
    "sim_aggregate_se",
    "slots",
    "warmup",
    "replications",
    "seed",
];

/// Everything a run produces; the caller writes the CSV and prints the
/// summary.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ResultRow>,
    pub summary: String,
    pub with_sim: bool,
    pub unstable_everywhere: bool,
}

/// Analytical evaluation of one (n, q, q0, gamma) point.
fn analyze_point(
    spec: &ScenarioSpec,
    n: usize,
    q: f64,
    q0: f64,
    gamma: f64,
) -> Result<ResultRow, RunError> {
    let geometry = spec.geometry(n, gamma).build()?;
    let (characterization, throughput): (QueueCharacterization, _) =
        if n == 2 && !spec.strict_paper_formulas {
            let s = TwoUserScenario::new(geometry, q0, q, q)?;
            let c = s.characterize_queue();
            let t = s.throughput().ok().map(|t| (t.per_user[0], t.no_relay_per_user[0]));
            (c, t)
        } else {
            let mut params: SymmetricLinkParams = geometry.symmetric_link_params()?;
            if spec.strict_paper_formulas {
                params = params.with_relay_interference(RelayInterferenceConvention::GammaRelay);
            }
            let s = SymmetricScenario::new(params, n, q, q0)?;
            let c = s.characterize_queue();
            let t = s.throughput().ok().map(|t| (t.per_user, t.no_relay_per_user));
            (c, t)
        };

    // The no-relay baseline exists regardless of stability.
    let no_relay_per_user = {
        let geometry = spec.geometry(n, gamma).build()?;
        let params = geometry.symmetric_link_params()?;
        SymmetricScenario::new(params, n, q, q0)?.no_relay_per_user()
    };
    let no_relay_aggregate = n as f64 * no_relay_per_user;
    let (throughput_per_user, aggregate, relay_gain) = match throughput {
        Some((per_user, _)) => {
            let aggregate = n as f64 * per_user;
            (Some(per_user), Some(aggregate), Some(aggregate / no_relay_aggregate))
        }
        None => (None, None, None),
    };
    Ok(ResultRow {
        n,
        q,
        q0,
        gamma,
        alpha: spec.alpha,
        lambda0: characterization.lambda0,
        lambda1: characterization.lambda1,
        lambda: characterization.lambda,
        mu: characterization.mu,
        q0min: characterization.q0min,
        stable: characterization.stable,
        prob_empty: characterization.prob_empty.value(),
        mean_queue: characterization.mean_queue.value(),
        throughput_per_user,
        aggregate,
        no_relay_per_user,
        no_relay_aggregate,
        relay_gain,
        sim: None,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, RunError> {
    let spec = &config.scenario;
    let mut metadata: Vec<(String, String)> = vec![
        ("mode".into(), mode_name(config.mode).into()),
        ("preset".into(), config.preset.name().into()),
    ];
    if spec.strict_paper_formulas {
        metadata.push(("strict_paper_formulas".into(), "true".into()));
    }

    // Expand the grid points (n, q, q0, gamma) per mode.
    let points: Vec<(usize, f64, f64, f64)> = match config.mode {
        Mode::Analyze | Mode::Simulate => vec![(
            spec.n.expect("validated"),
            spec.q.expect("validated"),
            spec.q0.expect("validated"),
            spec.gamma.expect("validated"),
        )],
        Mode::Sweep => {
            let axis = config.sweep_axis.expect("validated");
            let grid = config.grid.as_ref().expect("validated");
            metadata.push(("sweep".into(), axis.name().into()));
            grid.iter()
                .map(|&v| match axis {
                    SweepAxis::N => (v as usize, spec.q.unwrap(), spec.q0.unwrap(), spec.gamma.unwrap()),
                    SweepAxis::Q => (spec.n.unwrap(), v, spec.q0.unwrap(), spec.gamma.unwrap()),
                    SweepAxis::Q0 => (spec.n.unwrap(), spec.q.unwrap(), v, spec.gamma.unwrap()),
                    SweepAxis::Gamma => (spec.n.unwrap(), spec.q.unwrap(), spec.q0.unwrap(), v),
                })
                .collect()
        }
        Mode::Preset => preset_points(config, &mut metadata),
    };

    let mut rows: Vec<ResultRow> = points
        .par_iter()
        .map(|&(n, q, q0, gamma)| analyze_point(spec, n, q, q0, gamma))
        .collect::<Result<_, _>>()?;

    let with_sim = config.mode == Mode::Simulate;
    if with_sim {
        for row in rows.iter_mut() {
            attach_simulation(config, row)?;
        }
        metadata.push(("slots".into(), config.sim.slots.to_string()));
        metadata.push(("seed".into(), config.sim.seed.to_string()));
        metadata.push(("replications".into(), config.sim.replications.to_string()));
    }

    let unstable_everywhere = rows.iter().all(|r| !r.stable);
    let summary = summarize(config, &rows, unstable_everywhere);
    Ok(ExperimentOutput { metadata, rows, summary, with_sim, unstable_everywhere })
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Analyze => "analyze",
        Mode::Simulate => "simulate",
        Mode::Sweep => "sweep",
        Mode::Preset => "preset",
    }
}

/// The figure presets.  Defaults (documented in the metadata): q0 = 1,
/// q = 0.1 for user-count sweeps, q = 0.2 for the queue figure, gamma runs
/// over {0.5, 0.8, 1.2, 2.5}; any explicitly configured key overrides.
fn preset_points(
    config: &ExperimentConfig,
    metadata: &mut Vec<(String, String)>,
) -> Vec<(usize, f64, f64, f64)> {
    let spec = &config.scenario;
    let gammas: Vec<f64> = match spec.gamma {
        Some(g) => vec![g],
        None => GAMMA_FAMILY.to_vec(),
    };
    let q0 = spec.q0.unwrap_or(1.0);
    if spec.q0.is_none() {
        metadata.push(("q0".into(), "1 (preset default)".into()));
    }
    let mut points = Vec::new();
    match config.preset {
        Preset::FigAggregateVsN | Preset::FigQ0minVsN => {
            let q = spec.q.unwrap_or(0.1);
            if spec.q.is_none() {
                metadata.push(("q".into(), "0.1 (preset default)".into()));
            }
            for &gamma in &gammas {
                for n in 1..=30 {
                    points.push((n, q, q0, gamma));
                }
            }
        }
        Preset::FigThroughputVsQ => {
            let ns: Vec<usize> = match spec.n {
                Some(n) => vec![n],
                None => vec![2, 5, 10],
            };
            for &gamma in &gammas {
                for &n in &ns {
                    for i in 1..=99 {
                        points.push((n, i as f64 / 100.0, q0, gamma));
                    }
                }
            }
        }
        Preset::FigQueueVsQ0 => {
            let n = spec.n.unwrap_or(2);
            let q = spec.q.unwrap_or(0.2);
            if spec.q.is_none() {
                metadata.push(("q".into(), "0.2 (preset default)".into()));
            }
            for &gamma in &gammas {
                for i in 1..=50 {
                    points.push((n, q, i as f64 / 50.0, gamma));
                }
            }
        }
        Preset::PaperBaseline => unreachable!("paper-baseline is not a figure preset"),
    }
    points
}

fn attach_simulation(config: &ExperimentConfig, row: &mut ResultRow) -> Result<(), RunError> {
    let geometry = config.scenario.geometry(row.n, row.gamma).build()?;
    let scenario = SimScenario::uniform(geometry, row.q, row.q0)?;
    let mut sim_config = SimConfig::new(
        scenario,
        config.sim.slots,
        config.sim.seed,
        config.sim.replications,
    );
    if let Some(warmup) = config.sim.warmup {
        sim_config.warmup = warmup;
    }
    let stats = sim::run(&sim_config)?;
    let per_user = stats.per_user_throughput[0];
    row.sim = Some(SimColumns {
        prob_empty: stats.prob_empty.mean,
        prob_empty_se: stats.prob_empty.std_err,
        mean_queue: stats.mean_queue.mean,
        mean_queue_se: stats.mean_queue.std_err,
        lambda: stats.lambda.mean,
        lambda_se: stats.lambda.std_err,
        mu: stats.service_rate.mean,
        mu_se: stats.service_rate.std_err,
        throughput_per_user: per_user.mean,
        throughput_per_user_se: per_user.std_err,
        aggregate: stats.aggregate_throughput.mean,
        aggregate_se: stats.aggregate_throughput.std_err,
        slots: sim_config.slots,
        warmup: sim_config.warmup,
        replications: sim_config.replications,
        seed: sim_config.seed,
    });
    Ok(())
}

fn summarize(config: &ExperimentConfig, rows: &[ResultRow], unstable_everywhere: bool) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    let stable = rows.iter().filter(|r| r.stable).count();
    let _ = writeln!(
        out,
        "{} ({}): {} row(s), {} stable",
        mode_name(config.mode),
        config.preset.name(),
        rows.len(),
        stable
    );
    if unstable_everywhere {
        let _ = writeln!(
            out,
            "every grid point is unstable; smallest q0min in the grid is {}",
            rows.iter().map(|r| r.q0min).fold(f64::INFINITY, f64::min)
        );
        return out;
    }

    // Argmax of aggregate throughput among stable rows, per gamma.
    let mut gammas: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    for &gamma in &gammas {
        let Some(best) = rows
            .iter()
            .filter(|r| r.gamma == gamma && r.stable)
            .max_by(|a, b| a.aggregate.unwrap().total_cmp(&b.aggregate.unwrap()))
        else {
            let _ = writeln!(out, "gamma = {gamma}: no stable point");
            continue;
        };
        let _ = write!(
            out,
            "gamma = {gamma}: best aggregate {:.4} at n = {}, q = {}, q0 = {} \
             (per-user {:.4}, relay gain {:.2})",
            best.aggregate.unwrap(),
            best.n,
            best.q,
            best.q0,
            best.throughput_per_user.unwrap(),
            best.relay_gain.unwrap(),
        );
        match config.sweep_axis {
            Some(SweepAxis::Q0) => {
                let _ = write!(out, "; stability boundary q0min = {:.4}", best.q0min);
            }
            _ => match config.preset {
                Preset::FigAggregateVsN | Preset::FigQ0minVsN => {
                    let _ = write!(out, "; N* = {}", best.n);
                }
                Preset::FigThroughputVsQ => {
                    let per_n = rows
                        .iter()
                        .filter(|r| r.gamma == gamma && r.stable)
                        .fold(std::collections::BTreeMap::new(), |mut acc, r| {
                            let e = acc.entry(r.n).or_insert((r.q, f64::MIN));
                            if r.throughput_per_user.unwrap() > e.1 {
                                *e = (r.q, r.throughput_per_user.unwrap());
                            }
                            acc
                        });
                    for (n, (q_star, _)) in per_n {
                        let _ = write!(out, "; q*(n={n}) = {q_star}");
                    }
                }
                _ => {}
            },
        }
        let _ = writeln!(out);
    }
    if config.mode == Mode::Simulate {
        for r in rows {
            if let (Some(sim), Some(s0)) = (&r.sim, r.prob_empty) {
                let _ = writeln!(
                    out,
                    "simulation at n = {}, q = {}, q0 = {}, gamma = {}: \
                     P(Q=0) {:.4} vs {:.4}±{:.4}, per-user {:.4} vs {:.4}±{:.4}",
                    r.n,
                    r.q,
                    r.q0,
                    r.gamma,
                    s0,
                    sim.prob_empty,
                    sim.prob_empty_se,
                    r.throughput_per_user.unwrap_or(f64::NAN),
                    sim.throughput_per_user,
                    sim.throughput_per_user_se,
                );
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// CSV rendering and reparsing
// ---------------------------------------------------------------------------

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => DIVERGENT.to_string(),
    }
}

impl ResultRow {
    pub fn to_fields(&self) -> Vec<String> {
        let mut f = vec![
            self.n.to_string(),
            self.q.to_string(),
            self.q0.to_string(),
            self.gamma.to_string(),
            self.alpha.to_string(),
            self.lambda0.to_string(),
            self.lambda1.to_string(),
            self.lambda.to_string(),
            self.mu.to_string(),
            self.q0min.to_string(),
            self.stable.to_string(),
            opt(self.prob_empty),
            opt(self.mean_queue),
            opt(self.throughput_per_user),
            opt(self.aggregate),
            self.no_relay_per_user.to_string(),
            self.no_relay_aggregate.to_string(),
            opt(self.relay_gain),
        ];
        if let Some(sim) = &self.sim {
            f.extend([
                sim.prob_empty.to_string(),
                sim.prob_empty_se.to_string(),
                sim.mean_queue.to_string(),
                sim.mean_queue_se.to_string(),
                sim.lambda.to_string(),
                sim.lambda_se.to_string(),
                sim.mu.to_string(),
                sim.mu_se.to_string(),
                sim.throughput_per_user.to_string(),
                sim.throughput_per_user_se.to_string(),
                sim.aggregate.to_string(),
                sim.aggregate_se.to_string(),
                sim.slots.to_string(),
                sim.warmup.to_string(),
                sim.replications.to_string(),
                sim.seed.to_string(),
            ]);
        }
        f
    }
}

pub fn render_csv(output: &ExperimentOutput) -> String {
    let mut text = String::new();
    for (k, v) in &output.metadata {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    let mut header: Vec<&str> = ANALYTIC_HEADER.to_vec();
    if output.with_sim {
        header.extend(SIM_HEADER);
    }
    text.push_str(&header.join(","));
    text.push('\n');
    for row in &output.rows {
        text.push_str(&row.to_fields().join(","));
        text.push('\n');
    }
    text
}

/// Reparse a CSV produced by [`render_csv`]; used to guarantee round-trips.
pub fn parse_csv(text: &str) -> Result<(Vec<(String, String)>, Vec<ResultRow>), String> {
    let mut metadata = Vec::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.peek() {
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest.split_once('=').ok_or_else(|| format!("bad metadata: {line}"))?;
            metadata.push((k.trim().to_string(), v.trim().to_string()));
            lines.next();
        } else {
            break;
        }
    }
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| "missing header".to_string())?
        .split(',')
        .collect();
    let with_sim = header.len() == ANALYTIC_HEADER.len() + SIM_HEADER.len();
    if !with_sim && header.len() != ANALYTIC_HEADER.len() {
        return Err(format!("unexpected column count {}", header.len()));
    }
    let parse_f64 = |s: &str| -> Result<f64, String> {
        s.parse::<f64>().map_err(|_| format!("bad float `{s}`"))
    };
    let parse_opt = |s: &str| -> Result<Option<f64>, String> {
        if s == DIVERGENT {
            Ok(None)
        } else {
            parse_f64(s).map(Some)
        }
    };
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(format!("row has {} fields, expected {}", f.len(), header.len()));
        }
        let sim = if with_sim {
            Some(SimColumns {
                prob_empty: parse_f64(f[18])?,
                prob_empty_se: parse_f64(f[19])?,
                mean_queue: parse_f64(f[20])?,
                mean_queue_se: parse_f64(f[21])?,
                lambda: parse_f64(f[22])?,
                lambda_se: parse_f64(f[23])?,
                mu: parse_f64(f[24])?,
                mu_se: parse_f64(f[25])?,
                throughput_per_user: parse_f64(f[26])?,
                throughput_per_user_se: parse_f64(f[27])?,
                aggregate: parse_f64(f[28])?,
                aggregate_se: parse_f64(f[29])?,
                slots: f[30].parse().map_err(|_| "bad slots")?,
                warmup: f[31].parse().map_err(|_| "bad warmup")?,
                replications: f[32].parse().map_err(|_| "bad replications")?,
                seed: f[33].parse().map_err(|_| "bad seed")?,
            })
        } else {
            None
        };
        rows.push(ResultRow {
            n: f[0].parse().map_err(|_| "bad n")?,
            q: parse_f64(f[1])?,
            q0: parse_f64(f[2])?,
            gamma: parse_f64(f[3])?,
            alpha: parse_f64(f[4])?,
            lambda0: parse_f64(f[5])?,
            lambda1: parse_f64(f[6])?,
            lambda: parse_f64(f[7])?,
            mu: parse_f64(f[8])?,
            q0min: parse_f64(f[9])?,
            stable: f[10].parse().map_err(|_| "bad stable flag")?,
            prob_empty: parse_opt(f[11])?,
            mean_queue: parse_opt(f[12])?,
            throughput_per_user: parse_opt(f[13])?,
            aggregate: parse_opt(f[14])?,
            no_relay_per_user: parse_f64(f[15])?,
            no_relay_aggregate: parse_f64(f[16])?,
            relay_gain: parse_opt(f[17])?,
            sim,
        });
    }
    Ok((metadata, rows))
}
