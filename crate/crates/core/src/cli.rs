//! Command-line front end. Every command writes one JSON report.
//!
//! Exit status: `0` success, `1` a verified failure (an invariant, richness
//! or witness check came out false), `2` a usage error.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::conditions::Condition;
use crate::error::Error;
use crate::growth::{GrowthProfile, ProfileConfig};
use crate::mastertree::NodePath;
use crate::minimality::build_splitting_fusion;
use crate::names::DeterminedName;
use crate::rigidity::{build_bounding_fusion, counting_chain};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "treeforce", version, about = "Finite simulations of a perfect-tree forcing notion")]
pub struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate E_k, P_k and N_k for k = 0..=K.
    Sequences {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        profile: Option<String>,
    },
    /// Least K with P_k^m <= N_k from K on, with the inductive-step certificate.
    CheckRemark {
        #[arg(long)]
        m: u64,
    },
    /// ind of a node, e.g. "<0,1,255>".
    Ind {
        path: String,
        #[arg(long)]
        profile: Option<String>,
    },
    /// The node with a given index.
    PathOf {
        #[arg(long)]
        k: u64,
        #[arg(long)]
        profile: Option<String>,
    },
    /// Validate a condition file and certify its richness.
    CheckCondition {
        #[arg(long)]
        condition: PathBuf,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value_t = 3)]
        level: u64,
    },
    /// Run the pairwise-splitting fusion and the decoding round trip.
    SimulateMinimality {
        #[arg(long)]
        profile: Option<String>,
        /// Set-name file; defaults to the identity name of depth 4.
        #[arg(long)]
        name: Option<PathBuf>,
        /// Starting condition file; defaults to the master tree.
        #[arg(long)]
        start: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        steps: u64,
    },
    /// Run the bounding fusion and check the bound along every branch.
    SimulateRigidity {
        #[arg(long)]
        profile: Option<String>,
        /// Comma-separated index set, used for the default digit name.
        #[arg(long = "A", value_delimiter = ',')]
        a: Option<Vec<u64>>,
        /// Tuple-name file; overrides --A.
        #[arg(long)]
        name: Option<PathBuf>,
        /// T_1; defaults to the master tree restricted to <0,1>.
        #[arg(long)]
        start: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        steps: u64,
    },
    /// Check prod_{i in A, i<m} N_i <= P_{K+1} <= P_m exactly.
    VerifyCounting {
        #[arg(long = "A", value_delimiter = ',')]
        a: Option<Vec<u64>>,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        profile: Option<String>,
        /// Also check this many random (A, m) pairs with m <= 8.
        #[arg(long)]
        sweep: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// The JSON document written by every command.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub command: String,
    pub profile: String,
    pub parameters: Json,
    pub ledgers: Json,
    pub verdict: Verdict,
    /// Wall-clock time; excluded from golden comparisons.
    pub timing_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Ok,
    Failed,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report as JSON with the timing field removed.
    pub fn canonical(&self) -> Json {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().unwrap().remove("timing_ms");
        v
    }
}

/// A failure before any work is done.
#[derive(Debug)]
pub struct UsageError(pub String);

enum Outcome {
    Done(ExperimentReport),
    Usage(UsageError),
}

/// The explicit profile the rigidity defaults use.
pub fn rigidity_test_profile() -> ProfileConfig {
    let mut c = ProfileConfig::explicit(vec![1, 2, 2, 2, 2, 2, 1024]);
    c.id = Some("rigidity-test".into());
    c
}

fn load_profile(choice: Option<&str>, default: &str) -> Result<Arc<GrowthProfile>, UsageError> {
    let choice = choice.unwrap_or(default);
    let built = match choice {
        "canonical" => Ok(GrowthProfile::canonical()),
        "scaled" => Ok(GrowthProfile::scaled_default()),
        "rigidity-test" => GrowthProfile::from_config(rigidity_test_profile()),
        path => {
            let text = read(Path::new(path))?;
            return GrowthProfile::from_json(&text)
                .map(Arc::new)
                .map_err(|e| UsageError(format!("{path}: {e}")));
        }
    };
    built.map(Arc::new).map_err(|e| UsageError(format!("{choice}: {e}")))
}

fn read(path: &Path) -> Result<String, UsageError> {
    std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn load_condition(profile: &Arc<GrowthProfile>, path: &Path) -> Result<Condition, UsageError> {
    Condition::from_json(profile.clone(), &read(path)?).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn load_name(profile: &Arc<GrowthProfile>, path: &Path) -> Result<DeterminedName, UsageError> {
    DeterminedName::from_json(profile.clone(), &read(path)?).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. }
            | Error::Json(_)
            | Error::Io(_)
            | Error::InvalidProfile(_)
            | Error::InvalidPath { .. }
            | Error::MalformedCondition { .. }
            | Error::Name(_)
            | Error::NotCanonical
            | Error::InadmissibleBound(_)
    )
}

struct Builder {
    command: &'static str,
    profile: String,
    parameters: Json,
    started: Instant,
}

impl Builder {
    fn new(command: &'static str, profile: &str, parameters: Json) -> Self {
        Builder {
            command,
            profile: profile.to_string(),
            parameters,
            started: Instant::now(),
        }
    }

    fn finish(self, ledgers: Json, ok: bool) -> Outcome {
        Outcome::Done(ExperimentReport {
            command: self.command.into(),
            profile: self.profile,
            parameters: self.parameters,
            ledgers,
            verdict: if ok { Verdict::Ok } else { Verdict::Failed },
            timing_ms: self.started.elapsed().as_millis() as u64,
        })
    }

    /// Library errors become a failed report, or a usage error for bad input.
    fn fail(self, e: Error) -> Outcome {
        if is_usage(&e) {
            return Outcome::Usage(UsageError(e.to_string()));
        }
        self.finish(json!({ "error": e.to_string() }), false)
    }
}

macro_rules! tri {
    ($b:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return $b.fail(e),
        }
    };
}

macro_rules! usage {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return Outcome::Usage(e),
        }
    };
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> Json {
    serde_json::to_value(v).expect("serializable")
}

fn sequences(k: u64, profile: Option<&str>) -> Outcome {
    let g = usage!(load_profile(profile, "canonical"));
    let b = Builder::new("sequences", g.id(), json!({ "k": k }));
    let mut rows = Vec::new();
    for i in 0..=k {
        rows.push(json!({
            "k": i,
            "E": tri!(b, g.seq_e(i)).to_string(),
            "P": tri!(b, g.seq_p(i)).to_string(),
            "N": tri!(b, g.seq_n(i)).to_string(),
        }));
    }
    b.finish(json!({ "rows": rows }), true)
}

fn check_remark(m: u64) -> Outcome {
    let g = GrowthProfile::canonical();
    let b = Builder::new("check-remark", g.id(), json!({ "m": m }));
    let th = tri!(b, g.richness_threshold(m));
    let mut steps = Vec::new();
    for k in 0..=th.horizon {
        steps.push(json!({
            "k": k,
            "rich": tri!(b, g.rich_at(m, k)),
            "inductive_step": tri!(b, g.check_inductive_step(m, k)),
        }));
    }
    let ok = th.holds() && th.certified_from.is_some();
    b.finish(
        json!({
            "threshold": th.threshold,
            "certified_from": th.certified_from,
            "horizon": th.horizon,
            "certified_indices": th.certified_from.map(|c| th.horizon + 1 - c),
            "steps": steps,
        }),
        ok,
    )
}

fn ind(path: &str, profile: Option<&str>) -> Outcome {
    let g = usage!(load_profile(profile, "canonical"));
    let b = Builder::new("ind", g.id(), json!({ "path": path }));
    let p: NodePath = tri!(b, path.parse());
    let k = tri!(b, g.ind(&p));
    b.finish(json!({ "ind": k.to_string() }), true)
}

fn path_of(k: u64, profile: Option<&str>) -> Outcome {
    let g = usage!(load_profile(profile, "canonical"));
    let b = Builder::new("path-of", g.id(), json!({ "k": k }));
    let p = tri!(b, g.path_of(k));
    b.finish(json!({ "path": p.to_string() }), true)
}

fn check_condition(path: &Path, profile: Option<&str>, level: u64) -> Outcome {
    let g = usage!(load_profile(profile, "canonical"));
    let t = usage!(load_condition(&g, path));
    let b = Builder::new("check-condition", g.id(), json!({ "condition": path.display().to_string(), "level": level }));
    let trunk = tri!(b, t.trunk());
    let summary = json!({
        "trunk": trunk.to_string(),
        "explicit_nodes": t.explicit_nodes().len(),
        "explicit_depth": t.explicit_depth(),
    });
    match t.check_richness(level) {
        Ok(cert) => {
            let re = tri!(b, cert.recheck_definition(&t));
            let ok = re.failures.is_empty();
            b.finish(
                json!({ "condition": summary, "certificate": to_json(&cert), "definition_pairs_checked": re.checked }),
                ok,
            )
        }
        Err(Error::Unwitnessed(list)) => {
            let missing: Vec<_> = list.iter().map(|(s, n)| json!({ "node": s.to_string(), "n": n })).collect();
            b.finish(json!({ "condition": summary, "unwitnessed": missing }), false)
        }
        Err(e) => b.fail(e),
    }
}

fn simulate_minimality(profile: Option<&str>, name: Option<&Path>, start: Option<&Path>, steps: u64) -> Outcome {
    let g = usage!(load_profile(profile, "scaled"));
    let t0 = match start {
        Some(p) => usage!(load_condition(&g, p)),
        None => Condition::full(g.clone()),
    };
    let params = json!({
        "name": name.map(|p| p.display().to_string()),
        "start": start.map(|p| p.display().to_string()),
        "steps": steps,
    });
    let b = Builder::new("simulate-minimality", g.id(), params);
    let x = match name {
        Some(p) => usage!(load_name(&g, p)),
        None => tri!(b, DeterminedName::identity(&t0, 4)),
    };
    let f = tri!(b, build_splitting_fusion(&t0, &x, steps));
    let verified = tri!(b, f.verify());
    let rt = tri!(b, f.round_trip());
    let (_, cert) = tri!(b, f.chain.intersect());
    let splits: Vec<_> = f
        .splits
        .iter()
        .enumerate()
        .map(|(n, level)| {
            json!({
                "n": n,
                "pairs": level.iter().map(|s| json!({
                    "a": s.a.to_string(),
                    "b": s.b.to_string(),
                    "alpha": s.alpha,
                    "a_forces_in": s.a_forces_in,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let ok = rt.failures.is_empty();
    b.finish(
        json!({
            "levels": f.levels,
            "level_sizes": f.level_sets.iter().map(Vec::len).collect::<Vec<_>>(),
            "chain": to_json(f.chain.records()),
            "splits": splits,
            "pairs_verified": verified.pairs_checked,
            "richness_level": cert.level,
            "round_trip": to_json(&rt),
        }),
        ok,
    )
}

fn simulate_rigidity(profile: Option<&str>, a: Option<&[u64]>, name: Option<&Path>, start: Option<&Path>, steps: u64) -> Outcome {
    let g = usage!(load_profile(profile, "rigidity-test"));
    let t1 = match start {
        Some(p) => usage!(load_condition(&g, p)),
        None => match Condition::full(g.clone()).restrict(&NodePath::from([0, 1])) {
            Ok(t) => t,
            Err(e) => return Outcome::Usage(UsageError(e.to_string())),
        },
    };
    let a_list = a.map(<[u64]>::to_vec).unwrap_or_else(|| vec![0, 2, 4, 5]);
    let params = json!({
        "A": a_list,
        "name": name.map(|p| p.display().to_string()),
        "start": start.map(|p| p.display().to_string()),
        "steps": steps,
    });
    let b = Builder::new("simulate-rigidity", g.id(), params);
    let x = match name {
        Some(p) => usage!(load_name(&g, p)),
        None => tri!(b, DeterminedName::digits(g.clone(), 4, 3, a_list.clone())),
    };
    let f = tri!(b, build_bounding_fusion(&t1, &x, steps));
    let sweep = tri!(b, f.verify_branches());
    let decisions = tri!(b, f.verify_decisions());
    let bound: BTreeMap<String, Vec<u64>> =
        f.bound.iter().map(|(k, v)| (k.to_string(), v.iter().copied().collect())).collect();
    let ok = sweep.failures.is_empty() && f.ledgers.iter().all(|l| l.all_hold());
    b.finish(
        json!({
            "levels": f.levels,
            "thresholds": f.thresholds,
            "level_sizes": f.level_sets.iter().map(Vec::len).collect::<Vec<_>>(),
            "steps": to_json(&f.ledgers),
            "chain": to_json(f.chain.records()),
            "bound": bound,
            "uncovered": f.uncovered,
            "decisions_verified": decisions,
            "phi": to_json(&sweep),
        }),
        ok,
    )
}

/// A random `(A, m)` with `m ≤ 8` and `A ⊆ [0, 8]`.
pub fn random_counting_instance(rng: &mut impl Rng) -> (Vec<u64>, u64) {
    let m = rng.gen_range(0..=8u64);
    let a: BTreeSet<u64> = (0..=8u64).filter(|_| rng.gen_bool(0.5)).collect();
    (a.into_iter().collect(), m)
}

fn verify_counting(a: Option<&[u64]>, m: Option<u64>, profile: Option<&str>, sweep: Option<usize>, seed: u64) -> Outcome {
    let g = usage!(load_profile(profile, "canonical"));
    if sweep.is_none() && (a.is_none() || m.is_none()) {
        return Outcome::Usage(UsageError("verify-counting needs --A and --m, or --sweep".into()));
    }
    let b = Builder::new("verify-counting", g.id(), json!({ "A": a, "m": m, "sweep": sweep, "seed": seed }));
    let mut chains = Vec::new();
    let mut ok = true;
    if let (Some(a), Some(m)) = (a, m) {
        let c = tri!(b, counting_chain(&g, a, m));
        ok &= c.holds();
        chains.push(to_json(&c));
    }
    let mut swept = 0usize;
    let mut sweep_failures = Vec::new();
    if let Some(count) = sweep {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..count {
            let (a, m) = random_counting_instance(&mut rng);
            let c = tri!(b, counting_chain(&g, &a, m));
            swept += 1;
            if !c.holds() {
                ok = false;
                sweep_failures.push(json!({ "A": a, "m": m }));
            }
        }
    }
    b.finish(json!({ "chains": chains, "swept": swept, "sweep_failures": sweep_failures }), ok)
}

fn dispatch(cmd: &Command) -> Outcome {
    match cmd {
        Command::Sequences { k, profile } => sequences(*k, profile.as_deref()),
        Command::CheckRemark { m } => check_remark(*m),
        Command::Ind { path, profile } => ind(path, profile.as_deref()),
        Command::PathOf { k, profile } => path_of(*k, profile.as_deref()),
        Command::CheckCondition { condition, profile, level } => check_condition(condition, profile.as_deref(), *level),
        Command::SimulateMinimality { profile, name, start, steps } => {
            simulate_minimality(profile.as_deref(), name.as_deref(), start.as_deref(), *steps)
        }
        Command::SimulateRigidity { profile, a, name, start, steps } => {
            simulate_rigidity(profile.as_deref(), a.as_deref(), name.as_deref(), start.as_deref(), *steps)
        }
        Command::VerifyCounting { a, m, profile, sweep, seed } => {
            verify_counting(a.as_deref(), *m, profile.as_deref(), *sweep, *seed)
        }
    }
}

/// Runs one command; returns the report (if any) and the exit status.
pub fn execute(cli: &Cli) -> (Option<ExperimentReport>, i32) {
    match dispatch(&cli.command) {
        Outcome::Done(r) => {
            let code = if r.verdict == Verdict::Ok { EXIT_OK } else { EXIT_FAILED };
            (Some(r), code)
        }
        Outcome::Usage(UsageError(msg)) => {
            eprintln!("error: {msg}");
            (None, EXIT_USAGE)
        }
    }
}

/// Parses arguments, runs, writes the report; the return value is the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (report, code) = execute(&cli);
    if let Some(r) = report {
        let text = r.to_json();
        match &cli.out {
            Some(p) => {
                if let Err(e) = std::fs::write(p, text + "\n") {
                    eprintln!("error: {}: {e}", p.display());
                    return EXIT_USAGE;
                }
            }
            None => {
                use std::io::Write;
                let _ = writeln!(std::io::stdout().lock(), "{text}");
            }
        }
    }
    code
}
