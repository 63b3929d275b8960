//! Experiment configuration: a flat `key = value` file (one pair per line,
//! `#` comments), validated into a typed [`ExperimentConfig`]. Every
//! diagnostic names the offending key and line.

use std::fmt;
use std::path::Path;

use relay_mpr::channel::SymmetricGeometry;

#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(message: String) -> Result<T, ConfigError> {
    Err(ConfigError { message })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analyze,
    Simulate,
    Sweep,
    Preset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    PaperBaseline,
    FigAggregateVsN,
    FigThroughputVsQ,
    FigQ0minVsN,
    FigQueueVsQ0,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::PaperBaseline => "paper-baseline",
            Preset::FigAggregateVsN => "fig-aggregate-vs-n",
            Preset::FigThroughputVsQ => "fig-throughput-vs-q",
            Preset::FigQ0minVsN => "fig-q0min-vs-n",
            Preset::FigQueueVsQ0 => "fig-queue-vs-q0",
        }
    }

    pub fn is_figure(self) -> bool {
        self != Preset::PaperBaseline
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Q0,
    Q,
    N,
    Gamma,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Q0 => "q0",
            SweepAxis::Q => "q",
            SweepAxis::N => "n",
            SweepAxis::Gamma => "gamma",
        }
    }
}

/// Scenario knobs: symmetric geometry plus the transmit probabilities.
/// Optional fields are those a sweep may supply instead.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub n: Option<usize>,
    pub q: Option<f64>,
    pub q0: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: f64,
    pub eta_w: f64,
    pub ptx_user_mw: f64,
    pub ptx_relay_mw: f64,
    pub r_user_dest: f64,
    pub r_user_relay: f64,
    pub r_relay_dest: f64,
    pub fading_mean: f64,
    pub strict_paper_formulas: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        // The paper-baseline deployment.
        let g = SymmetricGeometry::baseline(1, 0.5);
        Self {
            n: None,
            q: None,
            q0: None,
            gamma: None,
            alpha: g.path_loss_exponent,
            eta_w: g.noise_w,
            ptx_user_mw: g.tx_power_user_w * 1e3,
            ptx_relay_mw: g.tx_power_relay_w * 1e3,
            r_user_dest: g.r_user_dest_m,
            r_user_relay: g.r_user_relay_m,
            r_relay_dest: g.r_relay_dest_m,
            fading_mean: g.fading_mean,
            strict_paper_formulas: false,
        }
    }
}

impl ScenarioSpec {
    /// Geometry for a concrete (n, gamma).
    pub fn geometry(&self, n: usize, gamma: f64) -> SymmetricGeometry {
        SymmetricGeometry {
            n_users: n,
            gamma_relay: gamma,
            gamma_dest: gamma,
            path_loss_exponent: self.alpha,
            noise_w: self.eta_w,
            tx_power_user_w: self.ptx_user_mw * 1e-3,
            tx_power_relay_w: self.ptx_relay_mw * 1e-3,
            r_user_dest_m: self.r_user_dest,
            r_user_relay_m: self.r_user_relay,
            r_relay_dest_m: self.r_relay_dest,
            fading_mean: self.fading_mean,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimSettings {
    pub slots: u64,
    pub warmup: Option<u64>,
    pub seed: u64,
    pub replications: u32,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { slots: 100_000, warmup: None, seed: 12345, replications: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub preset: Preset,
    pub scenario: ScenarioSpec,
    pub sweep_axis: Option<SweepAxis>,
    pub grid: Option<Vec<f64>>,
    pub sim: SimSettings,
}

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "preset",
    "n",
    "q",
    "q0",
    "gamma",
    "alpha",
    "eta",
    "ptx_user_mw",
    "ptx_relay_mw",
    "r_user_dest",
    "r_user_relay",
    "r_relay_dest",
    "v",
    "sweep",
    "q0_grid",
    "q_grid",
    "n_grid",
    "gamma_grid",
    "slots",
    "warmup",
    "seed",
    "replications",
    "strict_paper_formulas",
];

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError { message: format!("cannot read {}: {e}", path.display()) })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: Vec<(String, String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("line {line_no}: expected `key = value`, got `{raw}`"));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return err(format!("line {line_no}: unknown key `{key}`"));
        }
        if value.is_empty() {
            return err(format!("line {line_no}: key `{key}` has an empty value"));
        }
        if let Some((_, _, first)) = entries.iter().find(|(k, _, _)| *k == key) {
            return err(format!(
                "line {line_no}: key `{key}` already set on line {first}"
            ));
        }
        entries.push((key, value, line_no));
    }

    let get = |key: &str| entries.iter().find(|(k, _, _)| k == key);
    let parse_f64 = |key: &str| -> Result<Option<(f64, usize)>, ConfigError> {
        match get(key) {
            None => Ok(None),
            Some((_, v, line)) => match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(Some((x, *line))),
                _ => err(format!("line {line}: key `{key}`: `{v}` is not a finite number")),
            },
        }
    };
    let parse_prob = |key: &str| -> Result<Option<f64>, ConfigError> {
        match parse_f64(key)? {
            None => Ok(None),
            Some((x, line)) => {
                if (0.0..=1.0).contains(&x) {
                    Ok(Some(x))
                } else {
                    err(format!("line {line}: key `{key}` = {x} is outside [0, 1]"))
                }
            }
        }
    };
    let parse_positive = |key: &str| -> Result<Option<f64>, ConfigError> {
        match parse_f64(key)? {
            None => Ok(None),
            Some((x, line)) => {
                if x > 0.0 {
                    Ok(Some(x))
                } else {
                    err(format!("line {line}: key `{key}` = {x} must be positive"))
                }
            }
        }
    };
    let parse_u64 = |key: &str| -> Result<Option<u64>, ConfigError> {
        match get(key) {
            None => Ok(None),
            Some((_, v, line)) => v.parse::<u64>().map(Some).map_err(|_| ConfigError {
                message: format!("line {line}: key `{key}`: `{v}` is not a non-negative integer"),
            }),
        }
    };

    let preset = match get("preset") {
        None => Preset::PaperBaseline,
        Some((_, v, line)) => match v.as_str() {
            "paper-baseline" => Preset::PaperBaseline,
            "fig-aggregate-vs-n" => Preset::FigAggregateVsN,
            "fig-throughput-vs-q" => Preset::FigThroughputVsQ,
            "fig-q0min-vs-n" => Preset::FigQ0minVsN,
            "fig-queue-vs-q0" => Preset::FigQueueVsQ0,
            other => {
                return err(format!("line {line}: key `preset`: unknown preset `{other}`"));
            }
        },
    };
    let mode = match get("mode") {
        None => {
            if preset.is_figure() {
                Mode::Preset
            } else {
                Mode::Analyze
            }
        }
        Some((_, v, line)) => match v.as_str() {
            "analyze" => Mode::Analyze,
            "simulate" => Mode::Simulate,
            "sweep" => Mode::Sweep,
            "preset" => Mode::Preset,
            other => return err(format!("line {line}: key `mode`: unknown mode `{other}`")),
        },
    };
    if mode == Mode::Preset && !preset.is_figure() {
        return err("mode = preset requires one of the fig-* presets".into());
    }

    let mut scenario = ScenarioSpec {
        n: match parse_u64("n")? {
            Some(0) => {
                let line = get("n").unwrap().2;
                return err(format!("line {line}: key `n` must be at least 1"));
            }
            other => other.map(|x| x as usize),
        },
        q: parse_prob("q")?,
        q0: parse_prob("q0")?,
        gamma: match parse_f64("gamma")? {
            Some((x, line)) => {
                if x < 0.0 {
                    return err(format!("line {line}: key `gamma` = {x} must be non-negative"));
                }
                Some(x)
            }
            None => None,
        },
        ..ScenarioSpec::default()
    };
    if let Some(x) = parse_positive("alpha")? {
        scenario.alpha = x;
    }
    if let Some(x) = parse_positive("eta")? {
        scenario.eta_w = x;
    }
    if let Some(x) = parse_positive("ptx_user_mw")? {
        scenario.ptx_user_mw = x;
    }
    if let Some(x) = parse_positive("ptx_relay_mw")? {
        scenario.ptx_relay_mw = x;
    }
    if let Some(x) = parse_positive("r_user_dest")? {
        scenario.r_user_dest = x;
    }
    if let Some(x) = parse_positive("r_user_relay")? {
        scenario.r_user_relay = x;
    }
    if let Some(x) = parse_positive("r_relay_dest")? {
        scenario.r_relay_dest = x;
    }
    if let Some(x) = parse_positive("v")? {
        scenario.fading_mean = x;
    }
    if let Some((_, v, line)) = get("strict_paper_formulas") {
        scenario.strict_paper_formulas = match v.as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => {
                return err(format!(
                    "line {line}: key `strict_paper_formulas`: `{other}` is not a boolean"
                ));
            }
        };
    }

    let sweep_axis = match get("sweep") {
        None => None,
        Some((_, v, line)) => Some(match v.as_str() {
            "q0" => SweepAxis::Q0,
            "q" => SweepAxis::Q,
            "n" => SweepAxis::N,
            "gamma" => SweepAxis::Gamma,
            other => {
                return err(format!(
                    "line {line}: key `sweep`: `{other}` is not one of q0, q, n, gamma"
                ));
            }
        }),
    };
    let mut grid = None;
    for axis in [SweepAxis::Q0, SweepAxis::Q, SweepAxis::N, SweepAxis::Gamma] {
        let key = format!("{}_grid", axis.name());
        if let Some((_, v, line)) = get(&key) {
            if sweep_axis != Some(axis) {
                return err(format!(
                    "line {line}: key `{key}` is set but `sweep = {}` is not",
                    axis.name()
                ));
            }
            grid = Some(parse_grid(v, &key, *line, axis)?);
        }
    }

    match mode {
        Mode::Sweep => {
            let Some(axis) = sweep_axis else {
                return err("mode = sweep requires the `sweep` key".into());
            };
            if grid.is_none() {
                return err(format!(
                    "mode = sweep requires the `{}_grid` key",
                    axis.name()
                ));
            }
            let mut missing = Vec::new();
            if axis != SweepAxis::N && scenario.n.is_none() {
                missing.push("n");
            }
            if axis != SweepAxis::Q && scenario.q.is_none() {
                missing.push("q");
            }
            if axis != SweepAxis::Q0 && scenario.q0.is_none() {
                missing.push("q0");
            }
            if axis != SweepAxis::Gamma && scenario.gamma.is_none() {
                missing.push("gamma");
            }
            if !missing.is_empty() {
                return err(format!("missing required key(s) for sweep: {}", missing.join(", ")));
            }
        }
        Mode::Analyze | Mode::Simulate => {
            if sweep_axis.is_some() {
                return err("`sweep` is only valid with mode = sweep".into());
            }
            let mut missing = Vec::new();
            for (name, present) in [
                ("n", scenario.n.is_some()),
                ("q", scenario.q.is_some()),
                ("q0", scenario.q0.is_some()),
                ("gamma", scenario.gamma.is_some()),
            ] {
                if !present {
                    missing.push(name);
                }
            }
            if !missing.is_empty() {
                return err(format!("missing required key(s): {}", missing.join(", ")));
            }
        }
        Mode::Preset => {
            if sweep_axis.is_some() {
                return err("fig-* presets define their own sweeps; drop the `sweep` key".into());
            }
        }
    }

    let mut sim = SimSettings::default();
    if let Some(x) = parse_u64("slots")? {
        if x == 0 {
            let line = get("slots").unwrap().2;
            return err(format!("line {line}: key `slots` must be positive"));
        }
        sim.slots = x;
    }
    sim.warmup = parse_u64("warmup")?;
    if let Some(x) = parse_u64("seed")? {
        sim.seed = x;
    }
    if let Some(x) = parse_u64("replications")? {
        if x == 0 || x > u32::MAX as u64 {
            let line = get("replications").unwrap().2;
            return err(format!("line {line}: key `replications` = {x} is out of range"));
        }
        sim.replications = x as u32;
    }

    Ok(ExperimentConfig { mode, preset, scenario, sweep_axis, grid, sim })
}

/// Grid syntax: `lo:hi` (integer range, step 1), `lo:step:hi` (inclusive
/// within half a step), or a comma-separated list. Must end up strictly
/// increasing.
fn parse_grid(
    value: &str,
    key: &str,
    line: usize,
    axis: SweepAxis,
) -> Result<Vec<f64>, ConfigError> {
    let bad = |detail: &str| ConfigError {
        message: format!("line {line}: key `{key}`: {detail}"),
    };
    let mut points = Vec::new();
    if value.contains(',') {
        for part in value.split(',') {
            points.push(
                part.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(&format!("`{part}` is not a number")))?,
            );
        }
    } else if let Some((lo, rest)) = value.split_once(':') {
        let lo: f64 = lo.trim().parse().map_err(|_| bad("range start is not a number"))?;
        let (step, hi) = match rest.split_once(':') {
            Some((step, hi)) => (
                step.trim().parse::<f64>().map_err(|_| bad("range step is not a number"))?,
                hi.trim().parse::<f64>().map_err(|_| bad("range end is not a number"))?,
            ),
            None => (
                1.0,
                rest.trim().parse::<f64>().map_err(|_| bad("range end is not a number"))?,
            ),
        };
        if step <= 0.0 {
            return Err(bad("range step must be positive"));
        }
        if hi < lo {
            return Err(bad("range end is below its start"));
        }
        let count = ((hi - lo) / step + 0.5 * step.min(1.0)).floor() as usize;
        for i in 0..=count {
            points.push(lo + i as f64 * step);
        }
    } else {
        points.push(
            value
                .parse::<f64>()
                .map_err(|_| bad(&format!("`{value}` is not a number or grid")))?,
        );
    }
    if points.is_empty() {
        return Err(bad("grid is empty"));
    }
    for w in points.windows(2) {
        if w[1] <= w[0] {
            return Err(bad("grid must be strictly increasing"));
        }
    }
    for &p in &points {
        let ok = match axis {
            SweepAxis::Q0 | SweepAxis::Q => (0.0..=1.0).contains(&p),
            SweepAxis::N => p >= 1.0 && p.fract() == 0.0,
            SweepAxis::Gamma => p >= 0.0,
        };
        if !ok {
            return Err(bad(&format!("grid point {p} is invalid for axis {}", axis.name())));
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_analyze_config() {
        let cfg = parse_config_str(
            "preset = paper-baseline\ngamma = 0.5\nn = 2\nq = 0.2\nq0 = 0.8\n",
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Analyze);
        assert_eq!(cfg.scenario.n, Some(2));
        assert_eq!(cfg.scenario.gamma, Some(0.5));
        // baseline geometry defaults
        assert_eq!(cfg.scenario.r_user_dest, 130.0);
        assert_eq!(cfg.scenario.ptx_relay_mw, 10.0);
        assert_eq!(cfg.scenario.eta_w, 1e-11);
    }

    #[test]
    fn out_of_range_value_names_key_and_line() {
        let e = parse_config_str("mode = analyze\nq = 1.5\n").unwrap_err();
        assert!(e.message.contains("line 2"), "{e}");
        assert!(e.message.contains("`q`"), "{e}");
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let e = parse_config_str("gamma = 0.5\nbogus = 1\n").unwrap_err();
        assert!(e.message.contains("line 2"), "{e}");
        assert!(e.message.contains("bogus"), "{e}");
    }

    #[test]
    fn missing_required_keys_are_listed() {
        let e = parse_config_str("mode = analyze\ngamma = 0.5\n").unwrap_err();
        assert!(e.message.contains("n, q, q0"), "{e}");
    }

    #[test]
    fn sweep_config_with_integer_range() {
        let cfg = parse_config_str(
            "mode = sweep\nsweep = n\nn_grid = 1:30\nq = 0.1\nq0 = 1\ngamma = 2.5\n",
        )
        .unwrap();
        assert_eq!(cfg.sweep_axis, Some(SweepAxis::N));
        let grid = cfg.grid.unwrap();
        assert_eq!(grid.len(), 30);
        assert_eq!(grid[0], 1.0);
        assert_eq!(grid[29], 30.0);
    }

    #[test]
    fn sweep_config_with_step_range_and_list() {
        let cfg = parse_config_str(
            "mode = sweep\nsweep = q0\nq0_grid = 0.1:0.1:1.0\nq = 0.2\nn = 2\ngamma = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.as_ref().unwrap().len(), 10);
        let cfg = parse_config_str(
            "mode = sweep\nsweep = gamma\ngamma_grid = 0.5, 0.8, 1.2, 2.5\nq = 0.2\nn = 2\nq0 = 1\n",
        )
        .unwrap();
        assert_eq!(cfg.grid.unwrap(), vec![0.5, 0.8, 1.2, 2.5]);
    }

    #[test]
    fn grid_must_increase() {
        let e = parse_config_str(
            "mode = sweep\nsweep = q\nq_grid = 0.5, 0.2\nn = 2\nq0 = 1\ngamma = 0.5\n",
        )
        .unwrap_err();
        assert!(e.message.contains("strictly increasing"), "{e}");
    }

    #[test]
    fn figure_preset_implies_preset_mode() {
        let cfg = parse_config_str("preset = fig-aggregate-vs-n\n").unwrap();
        assert_eq!(cfg.mode, Mode::Preset);
        assert_eq!(cfg.preset, Preset::FigAggregateVsN);
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let e = parse_config_str("gamma = 0.5\ngamma = 0.8\n").unwrap_err();
        assert!(e.message.contains("already set"), "{e}");
    }

    #[test]
    fn strict_formula_flag_parses() {
        let cfg = parse_config_str(
            "mode = analyze\nn = 2\nq = 0.2\nq0 = 1\ngamma = 0.5\nstrict_paper_formulas = true\n",
        )
        .unwrap();
        assert!(cfg.scenario.strict_paper_formulas);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = parse_config_str(
            "# experiment\n\nmode = analyze  # inline\nn = 2\nq = 0.2\nq0 = 1\ngamma = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::Analyze);
    }
}
