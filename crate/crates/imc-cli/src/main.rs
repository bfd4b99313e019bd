//! Command-line interface for imprecise Markov chain inference.
//!
//! Exit codes: 0 success, 2 input error, 3 non-convergence, 4 size cap
//! exceeded. All outputs are deterministic: identical inputs produce
//! identical bytes.

use imc_cli::{document, svg};

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use document::{parse_event, parse_gamble, ModelDocument};
use imc::classify::classify;
use imc::limit::{invariant_upper_expectation, marginal_sequence, ConvergenceStatus, LimitOptions};
use imc::operators::PathGamble;
use imc::polytope::{CredalPolytope, Halfspace};
use imc::reliability::{failure_bounds, reliability_sweep, ReliabilitySpec};
use imc::setchain::{extreme_matrices, max_product_expectation, product_scrambling_check};
use imc::space::{Gamble, StateSpace};
use imc::tree::Situation;
use imc::{ImcError, Tolerances};

#[derive(Parser)]
#[command(
    name = "imc",
    version,
    about = "Inference for Markov chains with imprecisely known probabilities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    Upper,
    Lower,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Lower/upper expectation bounds: marginal, joint or conditional.
    Expect {
        /// Model document (JSON).
        model: PathBuf,
        /// Gamble file (JSON map state -> value).
        gamble: Option<PathBuf>,
        /// Comma-separated state labels; shorthand for a 0/1 gamble.
        #[arg(long, conflicts_with = "gamble")]
        event: Option<String>,
        /// Time of the marginal query (1 is the initial state).
        #[arg(long)]
        time: Option<usize>,
        /// Horizon of a joint query over full paths.
        #[arg(long, requires = "joint", conflicts_with = "time")]
        horizon: Option<usize>,
        /// Map on paths (JSON, keys are comma-joined labels).
        #[arg(long, requires = "horizon")]
        joint: Option<PathBuf>,
        /// Condition a joint query on an observed path prefix.
        #[arg(long, requires = "joint")]
        situation: Option<String>,
        #[arg(long, value_enum, default_value = "both")]
        side: Side,
    },
    /// Communication classes, periods, regularity and absorption flags.
    Classify { model: PathBuf },
    /// Invariant upper expectation by fixed-point iteration.
    Limit {
        model: PathBuf,
        gamble: Option<PathBuf>,
        #[arg(long, conflicts_with = "gamble")]
        event: Option<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        /// Write the envelope trace as CSV (columns n, min, max).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Per-step singleton probability bounds, as CSV and optionally SVG.
    Trajectory {
        model: PathBuf,
        #[arg(long)]
        steps: usize,
        /// Output path prefix; writes <prefix>.csv and optionally <prefix>.svg.
        #[arg(long)]
        out: String,
        /// Draw the per-step credal polytopes in the simplex (3 states only).
        #[arg(long)]
        svg: bool,
    },
    /// Compare operator powers against the extreme-matrix fold, or test
    /// product scrambling.
    Setchain {
        model: PathBuf,
        /// Gamble file for the comparison query.
        #[arg(long = "h")]
        h: Option<PathBuf>,
        /// Number of steps for the comparison query.
        #[arg(long = "n")]
        n: Option<usize>,
        /// State at which the values are compared.
        #[arg(long = "x")]
        x: Option<String>,
        /// Run the product-scrambling check instead.
        #[arg(long, conflicts_with_all = ["h", "n", "x"])]
        scrambling: bool,
        #[arg(long, default_value_t = 6)]
        m_max: usize,
    },
    /// k-out-of-n:F failure probability bounds.
    Reliability {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        r_lower: Option<f64>,
        #[arg(long)]
        r_upper: Option<f64>,
        /// Sweep grid file (JSON with k, midpoints, half_widths,
        /// component_counts); emits CSV.
        #[arg(long, conflicts_with_all = ["k", "n", "r_lower", "r_upper"])]
        sweep: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ImcError>() {
        Some(ImcError::SizeCap(_)) => 4,
        Some(ImcError::Internal(_)) => 1,
        _ => 2,
    }
}

fn load_tolerances() -> Result<Tolerances> {
    match std::env::var_os("IMC_SETTINGS") {
        None => Ok(Tolerances::default()),
        Some(path) => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading IMC_SETTINGS file {path:?}"))?;
            serde_json::from_str(&text).context("IMC_SETTINGS file does not parse")
        }
    }
}

fn load_document(path: &Path) -> Result<ModelDocument> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading model file {path:?}"))?;
    ModelDocument::parse(&text).with_context(|| format!("in model file {path:?}"))
}

fn load_query_gamble(
    gamble: Option<&Path>,
    event: Option<&str>,
    space: &Arc<StateSpace>,
) -> Result<Gamble> {
    match (gamble, event) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading gamble file {path:?}"))?;
            parse_gamble(&text, space).with_context(|| format!("in gamble file {path:?}"))
        }
        (None, Some(list)) => parse_event(list, space),
        (None, None) => bail!("provide a gamble file or --event"),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    }
}

/// Fifteen significant digits, scientific notation.
fn sig15(v: f64) -> String {
    format!("{v:.14e}")
}

fn bounds_json(lower: f64, upper: f64, side: Side) -> String {
    match side {
        Side::Upper => format!("{{\"upper\": {}}}\n", sig15(upper)),
        Side::Lower => format!("{{\"lower\": {}}}\n", sig15(lower)),
        Side::Both => format!("{{\"lower\": {}, \"upper\": {}}}\n", sig15(lower), sig15(upper)),
    }
}

fn parse_joint_map(text: &str, space: &Arc<StateSpace>, horizon: usize) -> Result<PathGamble> {
    let map: std::collections::BTreeMap<String, f64> =
        serde_json::from_str(text).context("joint map file does not parse")?;
    let d = space.size();
    let expected = d
        .checked_pow(horizon as u32)
        .context("horizon too large for a dense joint map")?;
    if map.len() != expected {
        bail!(
            "joint map has {} entries, expected {expected} (one per path of length {horizon})",
            map.len()
        );
    }
    for key in map.keys() {
        let parts: Vec<&str> = key.split(',').collect();
        if parts.len() != horizon || parts.iter().any(|p| space.index_of(p).is_none()) {
            bail!("joint map key {key:?} is not a comma-joined path of {horizon} state labels");
        }
    }
    PathGamble::from_fn(Arc::clone(space), horizon, |tuple| {
        let key = tuple
            .iter()
            .map(|&x| space.label(x))
            .collect::<Vec<_>>()
            .join(",");
        *map.get(&key).expect("coverage checked above")
    })
    .map_err(Into::into)
}

fn parse_situation(list: &str, space: &StateSpace) -> Result<Situation> {
    let labels: Vec<&str> = list.split(',').map(str::trim).collect();
    Ok(Situation::from_labels(space, &labels)?)
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    let tol = load_tolerances()?;
    match cli.command {
        Command::Expect { model, gamble, event, time, horizon, joint, situation, side } => {
            let doc = load_document(&model)?;
            let space = doc.state_space()?;
            let (lower, upper) = match (time, horizon) {
                (Some(n), None) => {
                    if n == 0 {
                        bail!("--time starts at 1 (the initial state)");
                    }
                    let h = load_query_gamble(gamble.as_deref(), event.as_deref(), &space)?;
                    let chain = doc.to_chain(n, &tol)?;
                    *marginal_sequence(&chain, &h, n)?
                        .last()
                        .expect("n >= 1 yields at least one entry")
                }
                (None, Some(big_n)) => {
                    let path = joint.expect("clap requires --joint with --horizon");
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading joint map {path:?}"))?;
                    let f = parse_joint_map(&text, &space, big_n)?;
                    let chain = doc.to_chain(big_n, &tol)?;
                    match situation {
                        None => (chain.joint_lower(&f)?, chain.joint_upper(&f)?),
                        Some(list) => {
                            let sit = parse_situation(&list, &space)?;
                            (
                                chain.conditional_lower(&f, &sit)?,
                                chain.conditional_upper(&f, &sit)?,
                            )
                        }
                    }
                }
                (None, None) => bail!("specify --time N or --horizon N --joint FILE"),
                (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
            };
            print!("{}", bounds_json(lower, upper, side));
            Ok(ExitCode::SUCCESS)
        }

        Command::Classify { model } => {
            let doc = load_document(&model)?;
            let op = doc.stationary_operator(&tol)?;
            let report = classify(&op)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }

        Command::Limit { model, gamble, event, tol: iter_tol, max_iter, trace } => {
            let doc = load_document(&model)?;
            let space = doc.state_space()?;
            let op = doc.stationary_operator(&tol)?;
            let h = load_query_gamble(gamble.as_deref(), event.as_deref(), &space)?;
            let options = LimitOptions { tol: iter_tol, max_iter };
            let result = invariant_upper_expectation(&op, &h, &options)?;
            if let Some(path) = trace {
                let mut csv = String::from("n,min,max\n");
                for (n, (lo, hi)) in result.envelope_trace.iter().enumerate() {
                    csv.push_str(&format!("{n},{},{}\n", sig15(*lo), sig15(*hi)));
                }
                fs::write(&path, csv).with_context(|| format!("writing trace {path:?}"))?;
            }
            println!("{}", serde_json::to_string_pretty(&result)?);
            if result.status == ConvergenceStatus::Converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("iteration did not converge: {:?}", result.status);
                Ok(ExitCode::from(3))
            }
        }

        Command::Trajectory { model, steps, out, svg: want_svg } => {
            let doc = load_document(&model)?;
            let space = doc.state_space()?;
            if steps == 0 {
                bail!("--steps must be at least 1");
            }
            if want_svg && space.size() != 3 {
                bail!("--svg draws the two-dimensional simplex and needs exactly 3 states");
            }
            let chain = doc.to_chain(steps, &tol)?;
            let mut per_state: Vec<Vec<(f64, f64)>> = Vec::with_capacity(space.size());
            for x in 0..space.size() {
                let ind = Gamble::indicator(Arc::clone(&space), &[x]);
                per_state.push(marginal_sequence(&chain, &ind, steps)?);
            }

            let mut csv = String::from("n,state,lower,upper\n");
            for n in 1..=steps {
                for (x, label) in space.labels().iter().enumerate() {
                    let (lo, hi) = per_state[x][n - 1];
                    csv.push_str(&format!("{n},{label},{},{}\n", sig15(lo), sig15(hi)));
                }
            }
            let csv_path = format!("{out}.csv");
            fs::write(&csv_path, csv).with_context(|| format!("writing {csv_path}"))?;

            if want_svg {
                let selected: Vec<usize> = [1, 2, 3, 4, 5, 6, 8, 11, 22, steps]
                    .into_iter()
                    .filter(|&n| n <= steps)
                    .collect::<std::collections::BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let mut panels = Vec::new();
                for n in selected {
                    let halfspaces = (0..3)
                        .flat_map(|x| {
                            let (lo, hi) = per_state[x][n - 1];
                            let ind = Gamble::indicator(Arc::clone(&space), &[x]);
                            [
                                Halfspace::new(ind.clone(), hi),
                                Halfspace::new(ind.negated(), -lo),
                            ]
                        })
                        .collect();
                    let polytope = CredalPolytope::from_halfspaces_with(
                        Arc::clone(&space),
                        halfspaces,
                        &tol,
                    )?;
                    panels.push(svg::Panel { step: n, vertices: polytope.vertices().to_vec() });
                }
                let svg_path = format!("{out}.svg");
                fs::write(&svg_path, svg::render(&panels, space.labels()))
                    .with_context(|| format!("writing {svg_path}"))?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Setchain { model, h, n, x, scrambling, m_max } => {
            let doc = load_document(&model)?;
            let space = doc.state_space()?;
            let op = doc.stationary_operator(&tol)?;
            let set = extreme_matrices(&op, &tol)?;
            if scrambling {
                let verdict = product_scrambling_check(&set, m_max)?;
                println!("{}", serde_json::to_string_pretty(&verdict)?);
                return Ok(ExitCode::SUCCESS);
            }
            let (Some(h_path), Some(steps), Some(state)) = (h, n, x) else {
                bail!("comparison mode needs --h GAMBLE, --n STEPS and --x STATE (or use --scrambling)");
            };
            let text = fs::read_to_string(&h_path)
                .with_context(|| format!("reading gamble file {h_path:?}"))?;
            let gamble = parse_gamble(&text, &space)?;
            let at = space.require(&state)?;
            let operator_value = op.power_apply(&gamble, steps)?.value(at);
            let setchain_value = max_product_expectation(&set, &gamble, steps, at, &tol)?;
            let payload = json!({
                "operator_value": operator_value,
                "setchain_value": setchain_value,
                "agree": (operator_value - setchain_value).abs() < 1e-9,
            });
            println!("{}", serde_json::to_string_pretty(&payload)?);
            Ok(ExitCode::SUCCESS)
        }

        Command::Reliability { k, n, r_lower, r_upper, sweep } => {
            if let Some(path) = sweep {
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("reading sweep grid {path:?}"))?;
                let grid: SweepGrid =
                    serde_json::from_str(&text).context("sweep grid does not parse")?;
                let rows = reliability_sweep(
                    grid.k,
                    &grid.midpoints,
                    &grid.half_widths,
                    &grid.component_counts,
                )?;
                let mut csv = String::from("r,epsilon,n,f_lower,f_upper\n");
                for row in rows {
                    csv.push_str(&format!(
                        "{},{},{},{},{}\n",
                        row.r,
                        row.epsilon,
                        row.n,
                        sig15(row.f_lower),
                        sig15(row.f_upper)
                    ));
                }
                print!("{csv}");
                return Ok(ExitCode::SUCCESS);
            }
            let (Some(k), Some(n), Some(r_lower), Some(r_upper)) = (k, n, r_lower, r_upper)
            else {
                bail!("point mode needs --k, --n, --r-lower and --r-upper (or use --sweep)");
            };
            let spec = ReliabilitySpec::new(k, n, r_lower, r_upper)?;
            let (f_lower, f_upper) = failure_bounds(&spec)?;
            let payload = json!({
                "k": k,
                "n": n,
                "r_lower": r_lower,
                "r_upper": r_upper,
                "f_lower": f_lower,
                "f_upper": f_upper,
            });
            println!("{}", serde_json::to_string_pretty(&payload)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepGrid {
    k: usize,
    midpoints: Vec<f64>,
    half_widths: Vec<f64>,
    component_counts: Vec<usize>,
}
