//! `quadba`: enumerate, constants, separation, play, verify, serve.
//!
//! Exit codes: 0 ok, 2 usage or parse error, 3 resource cap, 4 invariant violation.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use quadba::badness::{
    check_s_gt_2, classify_d1, full_lattice_escape, full_lattice_escape_exact, margin_curve, sample_surface, CURVE_NS,
};
use quadba::constants::{ConstOptions, GeomConstants, DEFAULT_EPS};
use quadba::game::{parse_script, run_game, BKind, GameConfig, PlayerB, Rules};
use quadba::lattice::{enumerate_with, EnumOptions, Window, DEFAULT_BUDGET};
use quadba::manifest::{ManifestClock, RunManifest};
use quadba::rational::{parse_rational, parse_rational_vector};
use quadba::separation::{check_separation, SeparationReport};
use quadba::{Error, QuadraticForm, Rational, Variant};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "quadba", version, about = "Schmidt games on rational quadratic varieties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct FormArgs {
    /// Diagonal coefficients like "1,1,-1", or a symmetric matrix as JSON.
    #[arg(long)]
    form: String,
    /// Level `m` of `Q = m`, an exact rational.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    m: String,
}

impl FormArgs {
    fn parse(&self) -> Result<(QuadraticForm, Rational), Failure> {
        let q = QuadraticForm::parse(&self.form).map_err(|e| Failure::Usage(format!("--form: {e}")))?;
        let m = parse_rational(&self.m).map_err(|e| Failure::Usage(format!("--m: {e}")))?;
        Ok((q, m))
    }

    fn json(&self) -> Value {
        json!({"form": self.form, "m": self.m})
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    D1,
    Sgt2,
    FullLattice,
    Margin,
}

#[derive(Subcommand)]
enum Command {
    /// Integer points of `Q = m` with `lo <= ||u|| <= hi`, as JSON lines.
    Enumerate {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        #[arg(long, default_value_t = 10.0)]
        hi: f64,
        /// Work budget in candidate evaluations.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Output file; a `.manifest.json` sidecar is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Geometric constants report.
    Constants {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
    },
    /// Pairwise separation check, one CSV row per K.
    Separation {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long = "K", value_delimiter = ',', required = true)]
        k: Vec<f64>,
        /// Print a JSON report instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Plays a game of A against a B player and prints the transcript.
    Play {
        #[command(flatten)]
        form: FormArgs,
        #[arg(long, default_value_t = 30)]
        rounds: usize,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value = "classic")]
        variant: Rules,
        #[arg(long, default_value = "random")]
        adversary: BKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// B moves from a transcript, a JSON array or JSON lines.
        #[arg(long)]
        scripted: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Badness checks.
    Verify {
        #[arg(long)]
        check: Check,
        #[arg(long, default_value = "1,1,-1")]
        form: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        m: String,
        /// Vector for full-lattice and margin checks.
        #[arg(long, allow_hyphen_values = true)]
        v: Option<String>,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n_max: u64,
        /// Exponent of `psi(t) = t^-s`.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Runs the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory for per-move transcript snapshots.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Resource(String),
    Finding(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(_) => Failure::Finding(e.to_string()),
            e if e.is_resource() => Failure::Resource(e.to_string()),
            e => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Resource(m)) => {
            eprintln!("resource cap: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Finding(m)) => {
            eprintln!("INVARIANT VIOLATION: {m}");
            ExitCode::from(4)
        }
    }
}

fn emit(doc: &Value, out: Option<&PathBuf>) -> Outcome {
    let text = serde_json::to_string_pretty(doc).expect("report serializes");
    match out {
        Some(p) => fs::write(p, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn with_manifest(clock: ManifestClock, body: Value) -> Value {
    let mut doc = json!({ "manifest": clock.finish() });
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    doc
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Enumerate { form, lo, hi, budget, out } => {
            let (q, m) = form.parse()?;
            let cfg = json!({"form": form.form, "m": form.m, "lo": lo, "hi": hi, "budget": budget});
            let clock = RunManifest::start("enumerate", cfg, None);
            let w = Window::closed(lo, hi)?;
            let pts = enumerate_with(&q, &m, &w, EnumOptions { budget, ..EnumOptions::default() })?;
            let sink: Box<dyn Write> = match &out {
                Some(p) => Box::new(fs::File::create(p)?),
                None => Box::new(io::stdout().lock()),
            };
            let mut sink = BufWriter::new(sink);
            for p in &pts {
                writeln!(sink, "{}", p.to_json_line())?;
            }
            sink.flush()?;
            if let Some(p) = out {
                let mut side = p.into_os_string();
                side.push(".manifest.json");
                let text = serde_json::to_string_pretty(&clock.finish()).expect("manifest serializes");
                fs::write(side, text + "\n")?;
            }
            Ok(())
        }
        Command::Constants { form, eps } => {
            let (q, m) = form.parse()?;
            let mut cfg = form.json();
            cfg["eps"] = json!(eps);
            let clock = RunManifest::start("constants", cfg, None);
            let opts = ConstOptions { eps, ..ConstOptions::default() };
            let k = GeomConstants::get(&q, &m, opts)?;
            emit(&with_manifest(clock, json!({ "constants": k.report() })), None)
        }
        Command::Separation { form, k, json: as_json } => {
            let (q, m) = form.parse()?;
            let mut cfg = form.json();
            cfg["K"] = json!(k);
            let clock = RunManifest::start("separation", cfg, None);
            let variant = Variant::for_m(&m);
            let reports = k
                .iter()
                .map(|&k| check_separation(&q, &m, k, variant))
                .collect::<quadba::Result<Vec<SeparationReport>>>()?;
            if as_json {
                emit(&with_manifest(clock, json!({ "reports": reports })), None)?;
            } else {
                println!("{}", SeparationReport::CSV_HEADER);
                for r in &reports {
                    println!("{}", r.csv_row());
                }
            }
            match reports.iter().find(|r| !r.holds()) {
                Some(r) => Err(Failure::Finding(format!("separation fails at K = {}: ratio {:?}", r.k, r.ratio))),
                None => Ok(()),
            }
        }
        Command::Play { form, rounds, beta, variant, adversary, seed, scripted, out } => {
            let (q, m) = form.parse()?;
            let config = GameConfig::new(q, m, variant, beta, seed, rounds);
            let mut player = match &scripted {
                Some(p) => PlayerB::scripted(parse_script(&fs::read_to_string(p)?)?),
                None => PlayerB::new(adversary, seed)?,
            };
            let cfg = serde_json::to_value(&config).expect("config serializes");
            let clock = RunManifest::start("play", cfg, Some(seed));
            let t = run_game(config, &mut player)?;
            let cert = t.certificate.clone();
            emit(&with_manifest(clock, json!({ "transcript": t, "certificate": cert })), out.as_ref())
        }
        Command::Verify { check, form, m, v, eps, n_max, s, samples, n, seed } => {
            let args = FormArgs { form, m };
            verify(check, &args, v.as_deref(), eps, n_max, s, samples, n, seed)
        }
        Command::Serve { port, host, snapshot_dir } => {
            let rt = tokio::runtime::Runtime::new()?;
            let addr = SocketAddr::new(host, port);
            eprintln!("listening on http://{addr}");
            rt.block_on(quadba_service::serve(addr, snapshot_dir))?;
            Ok(())
        }
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, Failure> {
    s.trim_matches(['[', ']'])
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Failure::Usage(format!("--v {t:?}: {e}"))))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn verify(
    check: Check,
    args: &FormArgs,
    v: Option<&str>,
    eps: f64,
    n_max: u64,
    s: f64,
    samples: usize,
    n: u64,
    seed: u64,
) -> Outcome {
    let need_v = || v.ok_or_else(|| Failure::Usage("--v is required for this check".into()));
    let cfg = json!({"form": args.form, "m": args.m, "v": v, "eps": eps, "n_max": n_max, "s": s,
                     "samples": samples, "n": n});
    match check {
        Check::D1 => {
            let (q, m) = args.parse()?;
            let clock = RunManifest::start("verify d1", cfg, None);
            let c = classify_d1(&q, &m)?;
            emit(&with_manifest(clock, json!({ "d1": c })), None)
        }
        Check::Sgt2 => {
            let (q, m) = args.parse()?;
            let clock = RunManifest::start("verify sgt2", cfg, Some(seed));
            let pts = match v {
                Some(v) => vec![parse_floats(v)?],
                None => sample_surface(&q, samples, seed),
            };
            let r = check_s_gt_2(&q, &m, s, &pts, n)?;
            let passed = r.passed;
            emit(&with_manifest(clock, json!({ "sgt2": r })), None)?;
            if passed {
                Ok(())
            } else {
                Err(Failure::Finding("a sampled point has zero margin or a solution beyond the threshold".into()))
            }
        }
        Check::FullLattice => {
            let v = need_v()?;
            let clock = RunManifest::start("verify full-lattice", cfg, None);
            let r = match parse_rational_vector(v) {
                Ok(exact) => full_lattice_escape_exact(&exact, eps, n_max)?,
                Err(_) => full_lattice_escape(&parse_floats(v)?, eps, n_max)?,
            };
            let found = r.n.is_some();
            emit(&with_manifest(clock, json!({ "full_lattice": r })), None)?;
            if found {
                Ok(())
            } else {
                Err(Failure::Finding(format!("no n <= {n_max} brings n v within {eps} of the lattice")))
            }
        }
        Check::Margin => {
            let (q, m) = args.parse()?;
            let v = parse_floats(need_v()?)?;
            let clock = RunManifest::start("verify margin", cfg, None);
            let mut ns: Vec<u64> = CURVE_NS.iter().copied().filter(|&k| k < n).collect();
            ns.push(n);
            let c = margin_curve(&q, &m, &v, s, &ns)?;
            let ok = c.curve_non_increasing();
            emit(&with_manifest(clock, json!({ "margin": c })), None)?;
            if ok {
                Ok(())
            } else {
                Err(Failure::Finding("margin curve increases with N".into()))
            }
        }
    }
}
