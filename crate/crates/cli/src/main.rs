use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use copyfair::app::experiment::{run_experiment, ExperimentConfig, Target};
use copyfair::app::io::{format_rational, parse_densities, parse_instance};
use copyfair::app::pipeline::pipeline_allocate;
use copyfair::app::report::{emit_report, Format};
use copyfair::cake::{run_protocol, CakeOracle, ProtocolParams};
use copyfair::conditions::{
    ef_condition_chores, ef_condition_goods, mu_bound_chores, mu_bound_goods, prop_condition, tefx_condition,
    ConditionReport,
};
use copyfair::fairness::{gap_report, verify, Notion};
use copyfair::frobenius::decompose;
use copyfair::greedy::greedy_allocate;
use copyfair::norms::thresholds;
use copyfair::{Error, Instance, IntegralAllocation, Kind};

#[derive(Parser)]
#[command(name = "copyfair", version, about = "Fair allocation of multi-copy items among groups of agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an allocation with the envy-freeness pipeline.
    Allocate {
        #[arg(long)]
        input: PathBuf,
        /// Run even when copy counts violate the rounding precondition.
        #[arg(long)]
        force: bool,
        #[arg(long, default_value = "human")]
        format: Format,
    },
    /// Evaluate the sufficient condition for envy-freeness.
    Check {
        #[arg(long)]
        input: PathBuf,
        /// One of ef, prop, tefx.
        #[arg(long, default_value = "ef")]
        condition: String,
        #[arg(long, default_value = "human")]
        format: Format,
    },
    /// Copies per type that guarantee an envy-free allocation.
    MuBound {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "human")]
        format: Format,
    },
    /// Check a given allocation against a fairness notion.
    Verify {
        #[arg(long)]
        input: PathBuf,
        /// JSON `{"counts": [[...], ...]}`, rows in the input's group order.
        #[arg(long)]
        allocation: PathBuf,
        #[arg(long, default_value = "EF")]
        notion: Notion,
        #[arg(long, default_value = "human")]
        format: Format,
    },
    /// Write `k` as a nonnegative combination of group sizes.
    Frobenius {
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<u64>,
        #[arg(long)]
        k: u64,
        #[arg(long, default_value = "human")]
        format: Format,
    },
    /// Discretize a cake and allocate the pieces.
    Cake {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lipschitz: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        pieces: Option<u64>,
        #[arg(long, default_value = "human")]
        format: Format,
    },
    /// Greedy allocation by the first agent's values.
    Greedy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "human")]
        format: Format,
    },
    /// Seeded trials over i.i.d. uniform valuations.
    Experiment {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "goods")]
        kind: String,
        #[arg(long)]
        target: Target,
        #[arg(long, default_value = "human")]
        format: Format,
    },
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })
}

fn load_instance(path: &Path) -> Result<Instance, Error> {
    parse_instance(&read(path)?)
}

/// Rows reordered from sorted group order back to the input's order.
fn input_order<T: Clone>(instance: &Instance, rows: &[T]) -> Vec<T> {
    let mut out = rows.to_vec();
    for (sorted, &original) in instance.original_order().iter().enumerate() {
        out[original] = rows[sorted].clone();
    }
    out
}

fn to_sorted_order<T: Clone>(instance: &Instance, rows: &[T]) -> Vec<T> {
    instance.original_order().iter().map(|&o| rows[o].clone()).collect()
}

fn emit<T: Serialize>(format: Format, value: &T, human: impl FnOnce() -> String) -> Result<(), Error> {
    match format {
        Format::Human => print!("{}", human()),
        Format::Json => println!("{}", serde_json::to_string_pretty(value).expect("reports serialize")),
        Format::Csv => {
            return Err(Error::UnsupportedScope("csv output is only available for experiments".into()));
        }
    }
    Ok(())
}

fn describe_condition(r: &ConditionReport) -> String {
    let rel = match r.direction {
        copyfair::conditions::Direction::AtMost => "<=",
        copyfair::conditions::Direction::AtLeast => ">=",
    };
    let mut s = format!(
        "{}: {} {rel} {} is {}\n",
        r.theorem,
        r.lhs,
        r.threshold,
        if r.satisfied { "satisfied" } else { "not satisfied" }
    );
    if let Some(mu) = r.mu_bound {
        s.push_str(&format!("copies per type: {mu}\n"));
    }
    for note in &r.notes {
        s.push_str(&format!("note: {note}\n"));
    }
    s
}

fn describe_allocation(instance: &Instance, allocation: &IntegralAllocation) -> String {
    let counts = input_order(instance, &allocation.counts);
    let sizes = input_order(instance, instance.group_sizes());
    counts
        .iter()
        .zip(&sizes)
        .enumerate()
        .map(|(i, (row, size))| format!("group {i} (size {size}): {row:?} per agent\n"))
        .collect()
}

fn condition_exit(r: &ConditionReport) -> u8 {
    if r.satisfied {
        0
    } else {
        2
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Allocate { input, force, format } => {
            let instance = load_instance(&input)?;
            let out = pipeline_allocate(&instance, force)?;
            let gaps: Vec<Vec<String>> = input_order(&instance, &out.gaps.pair_gaps)
                .iter()
                .map(|row| input_order(&instance, row).iter().map(format_rational).collect())
                .collect();
            let doc = json!({
                "allocation": input_order(&instance, &out.allocation.counts),
                "pair_gaps": gaps,
                "min_gap": out.gaps.min_gap.as_ref().map(format_rational),
                "envy_free": out.ef.holds,
                "strongly_envy_free": out.strong_ef.holds,
                "uniform_fallback": out.uniform_fallback,
                "lp_alpha": out.lp_alpha,
                "condition": out.condition,
                "precondition": out.precondition,
                "rounding": out.trace,
            });
            emit(format, &doc, || {
                let mut s = describe_allocation(&instance, &out.allocation);
                s.push_str(&format!(
                    "min gap: {}\nenvy-free: {}\n",
                    out.gaps.min_gap.as_ref().map_or("n/a".into(), format_rational),
                    out.ef.holds
                ));
                if out.uniform_fallback {
                    s.push_str("note: rounded allocation had envy; returned the uniform split\n");
                }
                if let Some(p) = &out.precondition {
                    s.push_str(&format!("forced past precondition: {p}\n"));
                }
                if let Some(c) = &out.condition {
                    s.push_str(&describe_condition(c));
                }
                s
            })?;
            Ok(out.exit_code() as u8)
        }
        Command::Check { input, condition, format } => {
            let instance = load_instance(&input)?;
            let report = match (condition.to_ascii_lowercase().as_str(), instance.kind()) {
                ("ef", Kind::Goods) => ef_condition_goods(&instance)?,
                ("ef", Kind::Chores) => ef_condition_chores(&instance)?,
                ("prop", _) => prop_condition(&instance)?,
                ("tefx", _) => tefx_condition(&instance)?,
                (other, _) => {
                    return Err(Error::Parse {
                        location: "condition".into(),
                        message: format!("unknown condition {other:?}"),
                    })
                }
            };
            emit(format, &report, || describe_condition(&report))?;
            Ok(condition_exit(&report))
        }
        Command::MuBound { input, format } => {
            let instance = load_instance(&input)?;
            let report = match instance.kind() {
                Kind::Goods => mu_bound_goods(&instance)?,
                Kind::Chores => mu_bound_chores(&instance)?,
            };
            emit(format, &report, || describe_condition(&report))?;
            Ok(if report.mu_bound.is_some() { 0 } else { 2 })
        }
        Command::Verify {
            input,
            allocation,
            notion,
            format,
        } => {
            let instance = load_instance(&input)?;
            let given: IntegralAllocation = serde_json::from_str(&read(&allocation)?).map_err(|e| Error::Parse {
                location: format!("{}: line {}, column {}", allocation.display(), e.line(), e.column()),
                message: e.to_string(),
            })?;
            if given.counts.len() != instance.groups() {
                return Err(Error::DimensionMismatch(format!(
                    "{} allocation rows for {} groups",
                    given.counts.len(),
                    instance.groups()
                )));
            }
            let sorted = IntegralAllocation::new(to_sorted_order(&instance, &given.counts));
            let verdict = verify(&instance, &sorted, notion)?;
            let gaps = gap_report(&instance, &sorted)?;
            let doc = json!({
                "verdict": verdict,
                "min_gap": gaps.min_gap.as_ref().map(format_rational),
            });
            emit(format, &doc, || {
                format!("{:?}: {}\n", notion, if verdict.holds { "holds" } else { "fails" })
                    + &verdict.witness.as_ref().map_or(String::new(), |w| format!("witness (sorted group order): {w:?}\n"))
            })?;
            Ok(if verdict.holds { 0 } else { 2 })
        }
        Command::Frobenius { sizes, k, format } => {
            let th = thresholds(&sizes)?;
            let result = decompose(&sizes, k);
            let doc = json!({
                "sizes": sizes,
                "k": k,
                "g": th.g,
                "theta": th.theta,
                "coefficients": result.as_ref().map(|d| d.coefficients.clone()),
            });
            emit(format, &doc, || match &result {
                Some(d) => format!("{k} = {}\n", render_combination(&sizes, &d.coefficients)),
                None => format!("{k} is not representable (g = {}, theta = {})\n", th.g, th.theta),
            })?;
            Ok(if result.is_some() { 0 } else { 2 })
        }
        Command::Cake {
            input,
            lipschitz,
            delta,
            pieces,
            format,
        } => {
            let densities = parse_densities(&read(&input)?)?;
            let mut oracle = CakeOracle::new(densities);
            let out = run_protocol(
                &mut oracle,
                ProtocolParams {
                    lipschitz,
                    delta,
                    forced_pieces: pieces,
                },
            )?;
            emit(format, &out, || {
                let mut s = format!("pieces: {}\n", out.pieces);
                for (i, b) in out.bundles.iter().enumerate() {
                    s.push_str(&format!("agent {i}: pieces {b:?}\n"));
                }
                s.push_str(&format!(
                    "queries: {} eval, {} cut\nstrongly envy-free: {}\n",
                    out.meter.eval_count, out.meter.cut_count, out.strong_ef.holds
                ));
                s.push_str(&describe_condition(&out.condition));
                for note in &out.preconditions.notes {
                    s.push_str(&format!("precondition: {note}\n"));
                }
                s
            })?;
            Ok(if out.ef.holds { 0 } else { 2 })
        }
        Command::Greedy { input, format } => {
            let instance = load_instance(&input)?;
            let (allocation, trace) = greedy_allocate(&instance)?;
            let tefx = verify(&instance, &allocation, Notion::Tefx)?;
            let condition = tefx_condition(&instance)?;
            let doc = json!({
                "allocation": allocation.counts,
                "trace": trace,
                "tefx": tefx.holds,
                "condition": condition,
            });
            emit(format, &doc, || {
                let mut s = describe_allocation(&instance, &allocation);
                s.push_str(&format!("transfer-EFX: {}\n", tefx.holds));
                s.push_str(&describe_condition(&condition));
                s
            })?;
            Ok(if tefx.holds { 0 } else { 2 })
        }
        Command::Experiment {
            n,
            m,
            trials,
            seed,
            kind,
            target,
            format,
        } => {
            let kind = match kind.to_ascii_lowercase().as_str() {
                "goods" => Kind::Goods,
                "chores" => Kind::Chores,
                other => {
                    return Err(Error::Parse {
                        location: "kind".into(),
                        message: format!("unknown kind {other:?}"),
                    })
                }
            };
            let report = run_experiment(&ExperimentConfig {
                n,
                m,
                trials,
                seed,
                kind,
                target,
            })?;
            print!("{}", emit_report(&report, format));
            Ok(0)
        }
    }
}

fn render_combination(sizes: &[u64], coefficients: &[u64]) -> String {
    let terms: Vec<String> = sizes
        .iter()
        .zip(coefficients)
        .map(|(s, c)| format!("{c}*{s}"))
        .collect();
    terms.join(" + ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
