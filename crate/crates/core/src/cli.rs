//! Command-line front end. Exit codes: 0 ok, 2 input, 3 budget,
//! 4 property violation, 5 unresolved reconstruction.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ehrhart::{self, EhrhartError, QStepFunction};
use crate::exactmath::{self, fmt_rat, parse_rat, IVec, Rat};
use crate::harness::{self, HarnessError, InstanceSpec, SuiteSummary};
use crate::polytope::{FacetKind, HPolytope};
use crate::reconstruct::{recover, HiddenOracle, ReconConfig, ReconError};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_PROPERTY: i32 = 4;
pub const EXIT_UNRESOLVED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "ehrhart", about = "Real-parameter Ehrhart functions of rational polytopes")]
pub struct Cli {
    /// Seed for every randomized path.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Lattice-point budget per enumeration, overriding EHRHART_POINT_BUDGET.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lattice points in sP.
    Count { polytope: PathBuf, s: String },
    /// Step function of s -> L_P(s) on (0, S].
    Stepfn {
        polytope: PathBuf,
        s_max: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Jumps at every breakpoint on (0, S], checked against facet counts.
    Jumps {
        polytope: PathBuf,
        s_max: String,
        /// Perturb the computed function before checking (testing aid).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Pseudopyramid volume by both routes.
    Ppyr { polytope: PathBuf },
    /// |L_{P+v}(s) / s^dim - rvol| at the integers 1..=S.
    Rvol {
        polytope: PathBuf,
        #[arg(long, default_value = "40")]
        s_max: String,
        /// Translation vector, comma-separated rationals.
        #[arg(long)]
        translate: Option<String>,
    },
    /// Recovers right-hand sides from an oracle of a hidden polytope.
    Reconstruct {
        /// Hidden polytope; generated from --seed when absent.
        #[arg(long)]
        hidden: Option<PathBuf>,
        /// JSON list of normals; defaults to the hidden polytope's own.
        #[arg(long)]
        normals: Option<PathBuf>,
        /// ReconConfig JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dimension of a generated instance.
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Pairwise distinctness of L_{P + k w}, k = 0..=K.
    Translates {
        polytope: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: i64,
        #[arg(long, default_value = "2")]
        window: String,
        /// Translation witness, comma-separated integers.
        #[arg(long)]
        w: Option<String>,
    },
    /// Lemma checks over generated instances, as JSON lines.
    Suite { spec: PathBuf },
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(msg: impl std::fmt::Display) -> CliError {
        CliError {
            code: EXIT_INPUT,
            message: msg.to_string(),
        }
    }
}

impl From<EhrhartError> for CliError {
    fn from(e: EhrhartError) -> CliError {
        let code = match e {
            EhrhartError::WindowTooLarge { .. } => EXIT_BUDGET,
            _ => EXIT_INPUT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ReconError> for CliError {
    fn from(e: ReconError) -> CliError {
        match e {
            ReconError::Oracle(inner) => inner.into(),
            ReconError::BudgetExceeded { .. } => CliError {
                code: EXIT_BUDGET,
                message: e.to_string(),
            },
            other => CliError::input(other),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> CliError {
        match e {
            HarnessError::Ehrhart(inner) => inner.into(),
            HarnessError::Recon(inner) => inner.into(),
            other => CliError::input(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        // a closed pipe downstream (`| head`) is not an error
        let code = if e.kind() == std::io::ErrorKind::BrokenPipe { 0 } else { EXIT_INPUT };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn read_polytope(path: &Path) -> Result<HPolytope, CliError> {
    read_json(path)
}

fn rat_arg(s: &str) -> Result<Rat, CliError> {
    parse_rat(s).map_err(CliError::input)
}

fn positive(s: &str) -> Result<Rat, CliError> {
    let r = rat_arg(s)?;
    if r <= Rat::from_integer(0.into()) {
        return Err(CliError::input(format!("{s} must be positive")));
    }
    Ok(r)
}

fn rat_list(s: &str, d: usize) -> Result<Vec<Rat>, CliError> {
    let v: Vec<Rat> = s.split(',').map(rat_arg).collect::<Result<_, _>>()?;
    if v.len() != d {
        return Err(CliError::input(format!("expected {d} coordinates, got {}", v.len())));
    }
    Ok(v)
}

fn emit(out: &mut dyn Write, v: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(CliError::input)?;
    writeln!(out, "{text}")?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(transparent)]
struct NormalList(#[serde(deserialize_with = "normals_de")] Vec<IVec>);

fn normals_de<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<IVec>, D::Error> {
    #[derive(Deserialize)]
    #[serde(transparent)]
    struct One(#[serde(with = "exactmath::serde_int_vec")] IVec);
    Ok(Vec::<One>::deserialize(d)?.into_iter().map(|o| o.0).collect())
}

#[derive(Serialize)]
struct JumpRow {
    s: String,
    left_jump: i64,
    right_jump: i64,
    front_facet_points: u64,
    back_facet_points: u64,
    check: &'static str,
}

/// Runs one command, writing its output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let budget = cli.budget.unwrap_or_else(ehrhart::point_budget);
    match &cli.command {
        Command::Count { polytope, s } => {
            let p = read_polytope(polytope)?;
            let s = rat_arg(s)?;
            writeln!(out, "{}", ehrhart::count_with_budget(&p, &s, budget)?)?;
        }
        Command::Stepfn {
            polytope,
            s_max,
            format,
        } => {
            let p = read_polytope(polytope)?;
            let s = positive(s_max)?;
            let f = ehrhart::step_function_window(&p, &Rat::from_integer(0.into()), &s, budget)?;
            match format {
                Format::Json => emit(out, &f)?,
                Format::Csv => write!(out, "{}", f.to_csv())?,
            }
        }
        Command::Jumps {
            polytope,
            s_max,
            inject_fault,
        } => {
            let p = read_polytope(polytope)?;
            let s = positive(s_max)?;
            let mut f = ehrhart::step_function_window(&p, &Rat::from_integer(0.into()), &s, budget)?;
            if *inject_fault {
                corrupt(&mut f);
            }
            let fc = ehrhart::FacetCounter::new(&p)?;
            let mut rows = Vec::new();
            let mut ok = true;
            for r in ehrhart::jumps(&f) {
                let front = fc.count(&r.s0, FacetKind::Front)?;
                let back = fc.count(&r.s0, FacetKind::Back)?;
                let good = front as i64 == r.left_jump && back as i64 == r.right_jump;
                ok &= good;
                rows.push(JumpRow {
                    s: fmt_rat(&r.s0),
                    left_jump: r.left_jump,
                    right_jump: r.right_jump,
                    front_facet_points: front,
                    back_facet_points: back,
                    check: if good { "OK" } else { "FAIL" },
                });
            }
            emit(out, &rows)?;
            if !ok {
                return Err(CliError {
                    code: EXIT_PROPERTY,
                    message: "jump magnitudes disagree with facet counts".into(),
                });
            }
        }
        Command::Ppyr { polytope } => {
            let p = read_polytope(polytope)?;
            let v = p.ppyr_volume().map_err(CliError::input)?;
            let agree = v.decomposition == v.hull;
            emit(
                out,
                &json!({
                    "decomposition": fmt_rat(&v.decomposition),
                    "hull": fmt_rat(&v.hull),
                    "agree": agree,
                }),
            )?;
            if !agree {
                return Err(CliError {
                    code: EXIT_PROPERTY,
                    message: "pseudopyramid volumes disagree".into(),
                });
            }
        }
        Command::Rvol {
            polytope,
            s_max,
            translate,
        } => {
            let p = read_polytope(polytope)?;
            let top = positive(s_max)?.floor().to_integer();
            let top: i64 = top
                .try_into()
                .map_err(|_| CliError::input("s_max too large"))?;
            let v = match translate {
                Some(t) => rat_list(t, p.dim())?,
                None => vec![Rat::from_integer(0.into()); p.dim()],
            };
            let grid: Vec<Rat> = (1..=top).map(|s| Rat::from_integer(s.into())).collect();
            let devs = harness::rvol_limit_check(&p, &v, &grid)?;
            let rows: Vec<_> = devs
                .iter()
                .map(|(s, d)| json!({"s": fmt_rat(s), "deviation": fmt_rat(d)}))
                .collect();
            emit(out, &json!({"rvol": fmt_rat(&p.translate(&v).map_err(CliError::input)?.rvol()), "deviations": rows}))?;
        }
        Command::Reconstruct {
            hidden,
            normals,
            config,
            dim,
        } => {
            let hidden = match hidden {
                Some(path) => read_polytope(path)?,
                None => {
                    let spec = InstanceSpec::new(*dim, 1, cli.seed);
                    spec.check()?;
                    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                    harness::random_polytope(&mut rng, &spec)
                }
            };
            let normals = match normals {
                Some(path) => read_json::<NormalList>(path)?.0,
                None => hidden.normals(),
            };
            let mut config: ReconConfig = match config {
                Some(path) => read_json(path)?,
                None => ReconConfig::default(),
            };
            if config.seed == 0 {
                config.seed = cli.seed;
            }
            let oracle = HiddenOracle::with_budget(hidden, budget);
            let report = recover(&oracle, &normals, &config)?;
            emit(out, &report)?;
            if !report.passed() {
                return Err(CliError {
                    code: EXIT_UNRESOLVED,
                    message: "reconstruction unresolved".into(),
                });
            }
        }
        Command::Translates {
            polytope,
            k,
            window,
            w,
        } => {
            let p = read_polytope(polytope)?;
            let window = positive(window)?;
            if *k < 0 {
                return Err(CliError::input("k must be nonnegative"));
            }
            let w: IVec = match w {
                Some(text) => {
                    let v = rat_list(text, p.dim())?;
                    if !v.iter().all(exactmath::is_integer) {
                        return Err(CliError::input("w must be integral"));
                    }
                    v.iter().map(|x| x.to_integer()).collect()
                }
                None => harness::find_translation_witness(&p)?,
            };
            let r = harness::check_translates_distinct(&p, &w, *k, &window)?;
            emit(out, &r)?;
            if !r.passed() {
                return Err(CliError {
                    code: EXIT_PROPERTY,
                    message: "translates are not all distinguished".into(),
                });
            }
        }
        Command::Suite { spec } => {
            let spec: InstanceSpec = read_json(spec)?;
            let records = harness::run_suite(&spec)?;
            for r in &records {
                writeln!(out, "{}", serde_json::to_string(r).map_err(CliError::input)?)?;
            }
            let summary = SuiteSummary::from_records(&records);
            writeln!(out, "{}", serde_json::to_string(&json!({"summary": summary})).map_err(CliError::input)?)?;
            if !summary.all_passed() {
                return Err(CliError {
                    code: EXIT_PROPERTY,
                    message: "suite has failing checks".into(),
                });
            }
        }
    }
    Ok(())
}

/// Moves one breakpoint's value so that its jumps no longer match.
fn corrupt(f: &mut QStepFunction) {
    if let Some(b) = f.breaks.first_mut() {
        b.at += 1;
    } else {
        f.base += 1;
    }
}
