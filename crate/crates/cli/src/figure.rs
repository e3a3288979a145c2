//! Tidy per-trial CSVs for the standard regret figures.
//!
//! Each figure has a built-in desk-scale experiment. Where a step-scale grid is
//! swept, only the scale with the lowest mean regret is kept for each
//! (series, axis value), matching how the step size is tuned for the plots.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::config::{ExperimentConfig, SweepPoint};
use crate::runner::{run_experiment, Experiment, RunOptions};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FigureId {
    RegretVsT,
    RegretVsM,
    RegretVsD,
    ErgodicRegret,
    StepsizeSensitivity,
}

impl FigureId {
    pub const ALL: [FigureId; 5] = [
        FigureId::RegretVsT,
        FigureId::RegretVsM,
        FigureId::RegretVsD,
        FigureId::ErgodicRegret,
        FigureId::StepsizeSensitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::RegretVsT => "regret_vs_T",
            FigureId::RegretVsM => "regret_vs_m",
            FigureId::RegretVsD => "regret_vs_d",
            FigureId::ErgodicRegret => "ergodic_regret",
            FigureId::StepsizeSensitivity => "stepsize_sensitivity",
        }
    }

    fn axis(self) -> &'static str {
        match self {
            FigureId::RegretVsT | FigureId::ErgodicRegret => "T",
            FigureId::RegretVsM => "m",
            FigureId::RegretVsD => "d",
            FigureId::StepsizeSensitivity => "s",
        }
    }

    /// Notes written into the CSV header.
    fn notes(self) -> &'static [&'static str] {
        match self {
            FigureId::RegretVsT => &[
                "synthetic online LP, m = 20 (desk scale; full scale uses m = 100), d = 10",
                "T in {250, 500, 1000, 2000, 4000}; 10 model draws x 10 runs",
            ],
            FigureId::RegretVsM => &[
                "synthetic online LP, T = 1000, d = 10, m in {5, 10, 20, 50, 100}",
            ],
            FigureId::RegretVsD => &[
                "synthetic online LP, T = 1000, m = 20 (desk scale; full scale uses m = 100)",
                "d in {5, 10, 20, 50}",
            ],
            FigureId::ErgodicRegret => &[
                "AR(1) matching, 10 advertisers, synthetic lognormal click-through rates",
                "eta = T^-1/2, c in {0, 0.5, 0.9}; 100 trials (desk scale; full scale uses 2500)",
            ],
            FigureId::StepsizeSensitivity => &[
                "AR(1) matching, 10 advertisers, c = 0.5, T = 4000, eta = s T^-1/2",
            ],
        }
    }

    /// The built-in experiment.
    pub fn config(self) -> ExperimentConfig {
        let text = match self {
            FigureId::RegretVsT => lp_config("regret_vs_T", "T = [250, 500, 1000, 2000, 4000]\nm = [20]\nd = [10]"),
            FigureId::RegretVsM => lp_config("regret_vs_m", "T = [1000]\nm = [5, 10, 20, 50, 100]\nd = [10]"),
            FigureId::RegretVsD => lp_config("regret_vs_d", "T = [1000]\nm = [20]\nd = [5, 10, 20, 50]"),
            FigureId::ErgodicRegret => matching_config("ergodic_regret", "T = [1000, 4000, 16000]\nc = [0.0, 0.5, 0.9]\ns = [1]"),
            FigureId::StepsizeSensitivity => {
                matching_config("stepsize_sensitivity", "T = [4000]\nc = [0.5]\ns = [0.1, 1, 10]")
            }
        };
        ExperimentConfig::parse(&text).expect("built-in figure config is valid")
    }

    /// Whether rows keep only the best step scale per (series, axis value).
    fn tunes_step(self) -> bool {
        !matches!(self, FigureId::ErgodicRegret | FigureId::StepsizeSensitivity)
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown figure {s:?}")))
    }
}

fn lp_config(id: &str, axes: &str) -> String {
    format!(
        r#"
experiment_id = "{id}"
master_seed = 2024

[trials]
model_draws = 10
runs_per_draw = 10

[stream]
kind = "iid_lp"
domain = "subsimplex"

[[algorithm]]
name = "ogd"
reference_fn = "l2"
per_sqrt_m = true

[[algorithm]]
name = "mwu"
reference_fn = "entropy"

[[algorithm]]
name = "mwu_p"
reference_fn = "entropy_projected"

[sweep]
{axes}
s = [0.1, 1, 10]
"#
    )
}

fn matching_config(id: &str, axes: &str) -> String {
    format!(
        r#"
experiment_id = "{id}"
master_seed = 2024

[trials]
model_draws = 10
runs_per_draw = 10

[stream]
kind = "ergodic_matching"
m = 10

[[algorithm]]
name = "ogd"
reference_fn = "l2"

[sweep]
{axes}
"#
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub figure: String,
    pub algorithm: String,
    pub axis: String,
    pub axis_value: f64,
    pub trial: usize,
    pub s: Option<f64>,
    pub regret: f64,
}

fn axis_value(fig: FigureId, p: &SweepPoint, s: Option<f64>) -> f64 {
    match fig {
        FigureId::RegretVsT | FigureId::ErgodicRegret => p.horizon as f64,
        FigureId::RegretVsM => p.m as f64,
        FigureId::RegretVsD => p.d as f64,
        FigureId::StepsizeSensitivity => s.unwrap_or(f64::NAN),
    }
}

fn series(fig: FigureId, exp: &Experiment, algorithm: usize, p: &SweepPoint) -> String {
    let name = &exp.config.algorithms[algorithm].name;
    match (fig, p.c) {
        (FigureId::ErgodicRegret, Some(c)) => format!("{name} c={c}"),
        _ => name.clone(),
    }
}

/// Per-trial rows of `exp` laid out for `fig`.
pub fn figure_rows(fig: FigureId, exp: &Experiment) -> Vec<FigureRow> {
    // (series, axis value bits, scale bits) -> rows, in first-seen order.
    let mut groups: BTreeMap<(String, u64), BTreeMap<u64, Vec<FigureRow>>> = BTreeMap::new();
    let mut order: Vec<(String, u64)> = Vec::new();
    for r in &exp.results {
        let p = &exp.points[r.point];
        let value = axis_value(fig, p, r.s);
        let key = (series(fig, exp, r.algorithm, p), value.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups
            .entry(key.clone())
            .or_default()
            .entry(r.s.unwrap_or(f64::NAN).to_bits())
            .or_default()
            .push(FigureRow {
                figure: fig.name().to_string(),
                algorithm: key.0.clone(),
                axis: fig.axis().to_string(),
                axis_value: value,
                trial: r.trial,
                s: r.s,
                regret: r.regret(),
            });
    }
    let mut out = Vec::new();
    for key in order {
        let by_scale = groups.remove(&key).expect("grouped");
        if fig.tunes_step() {
            let mean = |rows: &Vec<FigureRow>| rows.iter().map(|r| r.regret).sum::<f64>() / rows.len() as f64;
            let best = by_scale
                .into_values()
                .min_by(|a, b| mean(a).total_cmp(&mean(b)))
                .expect("nonempty group");
            out.extend(best);
        } else {
            out.extend(by_scale.into_values().flatten());
        }
    }
    out
}

/// Run the built-in experiment for `fig`.
pub fn run_figure(fig: FigureId, opts: &RunOptions) -> Result<Vec<FigureRow>, CliError> {
    let exp = run_experiment(&fig.config(), opts)?;
    Ok(figure_rows(fig, &exp))
}

pub fn write_figure<W: Write>(mut out: W, fig: FigureId, master_seed: u64, rows: &[FigureRow]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(out, "# figure: {fig}").map_err(io)?;
    for note in fig.notes() {
        writeln!(out, "# {note}").map_err(io)?;
    }
    if fig.tunes_step() {
        writeln!(out, "# step scale s chosen per (algorithm, axis value) from {{0.1, 1, 10}} by mean regret").map_err(io)?;
    }
    writeln!(out, "# regret = dual bound at the averaged multipliers minus collected reward").map_err(io)?;
    writeln!(out, "# master_seed = {master_seed}").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush().map_err(io)
}
