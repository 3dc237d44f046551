mod config;
mod record;
mod verify;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use xxz_core::bethe::{wavefunction_table, wavefunction_table_kind, ContourKind};
use xxz_core::deformation::{conjecture_partial_sum, theorem4_sum};
use xxz_core::ed::{LatticeWindow, OracleRun};
use xxz_core::freefermion::{bessel_fredholm_det, edge_probability, f2_estimate, kdet, toeplitz_rhs};
use xxz_core::onepoint::{leftmost_table, Method};
use xxz_core::{Error, ParticleConfig};

use config::{Config, ConfigError};
use record::{Entry, Manifest, Record};

const EXIT_VERIFY: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "xxz", version, about = "Domain-wall dynamics of the XXZ chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug)]
struct Global {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra override, repeatable: --set key=value
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for JSON, CSV, SVG and manifest files
    #[arg(long, global = true, default_value = "xxz-out")]
    out: PathBuf,
    /// Ignore and do not update the cache
    #[arg(long, global = true)]
    no_cache: bool,
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<String>,
    #[arg(long, global = true)]
    t: Option<String>,
    #[arg(long, global = true)]
    n_particles: Option<String>,
    /// Comma-separated initial sites or `step`
    #[arg(long, global = true, allow_hyphen_values = true)]
    y: Option<String>,
    /// Shorthand for x_min = x_max = x
    #[arg(long, global = true, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    x_min: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    x_max: Option<String>,
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, global = true)]
    grid_m: Option<String>,
    #[arg(long, global = true)]
    rtol: Option<String>,
    #[arg(long, global = true)]
    workers: Option<String>,
    #[arg(long, global = true)]
    cache_dir: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact-diagonalization marginals ℙ(X_m = x)
    Oracle {
        #[arg(long, default_value_t = 1)]
        particle: usize,
    },
    /// ψ_N(X; t) on every configuration in [x_min, x_max]
    Wavefunction {
        /// small, large or auto
        #[arg(long, default_value = "auto")]
        contour: String,
    },
    /// Left-most particle distribution (method: theorem2, detrep, brute_force, oracle)
    Onepoint,
    /// Δ = 0 determinants; without a flag, det(I − L) over [x_min, x_max]
    Freefermion {
        /// det(I − L) against e^{−t²} det(I_{j−k}(2t))
        #[arg(long, conflicts_with_all = ["kdet", "f2"])]
        boiden: bool,
        /// det K_N against det(I − L)
        #[arg(long, conflicts_with = "f2")]
        kdet: bool,
        /// edge probability against F₂ at the given s values
        #[arg(long)]
        f2: bool,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,1,2")]
        s: Vec<f64>,
    },
    /// Deformed-contour series for ℙ(X₁ ≥ x)
    Series,
    /// Finite partial sums of the conjectured edge formula
    Conjecture {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,1")]
        s: Vec<f64>,
    },
    /// Identity suite; exit code 2 when any identity fails
    Verify,
    /// CSV and SVG of a saved result record
    Plot {
        #[arg(long)]
        input: PathBuf,
    },
}

enum Failure {
    Config(String),
    Numeric(Error),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(m) => Failure::Config(m),
            other => Failure::Numeric(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    fn report(&self) -> (u8, Value) {
        let (code, kind, message) = match self {
            Failure::Config(m) => (EXIT_CONFIG, "invalid_config", m.clone()),
            Failure::Numeric(e) => {
                let kind = match e {
                    Error::Convergence { .. } => "convergence",
                    Error::Truncation(_) => "truncation",
                    Error::Pole(_) => "pole",
                    Error::NonFinite(_) => "non_finite",
                    Error::InvalidInput(_) => "invalid_config",
                };
                (EXIT_NUMERIC, kind, e.to_string())
            }
            Failure::Io(m) => (EXIT_CONFIG, "io", m.clone()),
        };
        (code, json!({"error": {"kind": kind, "message": message, "exit_code": code}}))
    }
}

fn overrides(g: &Global) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    if let Some(x) = &g.x {
        config::insert(&mut map, "x_min", x)?;
        config::insert(&mut map, "x_max", x)?;
    }
    let flags = [
        ("delta", &g.delta),
        ("t", &g.t),
        ("n_particles", &g.n_particles),
        ("y", &g.y),
        ("x_min", &g.x_min),
        ("x_max", &g.x_max),
        ("method", &g.method),
        ("grid_m", &g.grid_m),
        ("rtol", &g.rtol),
        ("workers", &g.workers),
        ("cache_dir", &g.cache_dir),
        ("seed", &g.seed),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            config::insert(&mut map, key, v)?;
        }
    }
    for kv in &g.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError(format!("--set expects key=value, got {kv:?}")))?;
        config::insert(&mut map, k.trim(), v.trim())?;
    }
    Ok(map)
}

fn parse_method(name: Option<&str>, default: Method) -> Result<Method, Failure> {
    Ok(match name.map(str::to_ascii_lowercase).as_deref() {
        None => default,
        Some("theorem2") => Method::Theorem2,
        Some("detrep") => Method::DetRep,
        Some("brute_force" | "brute") => Method::BruteForce,
        Some("oracle") => Method::Oracle,
        Some(other) => return Err(Failure::Config(format!("unknown method {other:?}"))),
    })
}

/// Route flags that enter the run id besides the configuration.
fn route(command: &Command) -> Value {
    match command {
        Command::Oracle { particle } => json!({"particle": particle}),
        Command::Wavefunction { contour } => json!({"contour": contour}),
        Command::Freefermion { boiden, kdet, f2, s } => json!({"boiden": boiden, "kdet": kdet, "f2": f2, "s": s}),
        Command::Conjecture { s } => json!({"s": s}),
        _ => json!({}),
    }
}

fn name(command: &Command) -> &'static str {
    match command {
        Command::Oracle { .. } => "oracle",
        Command::Wavefunction { .. } => "wavefunction",
        Command::Onepoint => "onepoint",
        Command::Freefermion { .. } => "freefermion",
        Command::Series => "series",
        Command::Conjecture { .. } => "conjecture",
        Command::Verify => "verify",
        Command::Plot { .. } => "plot",
    }
}

struct Computed {
    method: String,
    passed: bool,
    entries: Vec<Entry>,
    details: Value,
}

impl Computed {
    fn table(method: &str, entries: Vec<Entry>) -> Self {
        Self { method: method.to_string(), passed: true, entries, details: Value::Null }
    }
}

fn compute(command: &Command, cfg: &Config) -> Result<Computed, Failure> {
    let params = cfg.params()?;
    let opts = cfg.quad();
    let xs = cfg.x_min..=cfg.x_max;
    Ok(match command {
        Command::Oracle { particle } => {
            let run = OracleRun::new(&params)?;
            let entries =
                xs.map(|x| Ok(Entry::new(x, run.marginal(*particle, x)?, 1e-12))).collect::<Result<Vec<_>, Error>>()?;
            Computed::table("oracle", entries)
        }
        Command::Wavefunction { contour } => {
            let window = LatticeWindow::new(cfg.x_min, cfg.x_max)?;
            let table = match contour.as_str() {
                "auto" => wavefunction_table(&params, window, &opts)?,
                "small" => wavefunction_table_kind(&params, window, ContourKind::Small, &opts)?,
                "large" => wavefunction_table_kind(&params, window, ContourKind::Large, &opts)?,
                other => return Err(Failure::Config(format!("unknown contour {other:?}"))),
            };
            let entries = table
                .states
                .iter()
                .zip(&table.values)
                .map(|(x, v)| Entry::new(x.clone(), v.norm_sqr(), 2.0 * v.norm() * table.error).with("re", v.re).with("im", v.im))
                .collect();
            let mut out = Computed::table(&format!("wavefunction_{contour}"), entries);
            out.details = json!({"norm_sqr": table.norm_sqr(), "nodes": table.nodes, "error": table.error});
            out
        }
        Command::Onepoint => {
            let method = parse_method(cfg.method.as_deref(), Method::DetRep)?;
            let table = leftmost_table(&params, cfg.x_min, cfg.x_max, method, &opts)?;
            let entries = table.entries.iter().map(|e| Entry::new(e.x, e.value, e.abs_error)).collect();
            Computed::table(method.tag(), entries)
        }
        Command::Freefermion { boiden, kdet: use_kdet, f2, s } => {
            let t = cfg.t;
            if *f2 {
                let entries = s
                    .iter()
                    .map(|&s| {
                        let p = edge_probability(t, s)?;
                        let f = f2_estimate(s)?;
                        Ok(Entry::new(s, p.value, p.error).with("f2", f.value).with("difference", (p.value - f.value).abs()))
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                Computed::table("edge_vs_f2", entries)
            } else if *boiden {
                let entries = xs
                    .map(|x| {
                        let d = bessel_fredholm_det(x, t)?;
                        let rhs = toeplitz_rhs(x, t)?;
                        Ok(Entry::new(x, d.value, d.error).with("toeplitz", rhs).with("difference", (d.value - rhs).abs()))
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                Computed::table("boiden", entries)
            } else if *use_kdet {
                let n = params.n();
                let entries = xs
                    .map(|x| {
                        let k = kdet(t, x, n, &opts)?;
                        let d = bessel_fredholm_det(x, t)?;
                        Ok(Entry::new(x, k.value, k.error).with("fredholm", d.value).with("difference", (k.value - d.value).abs()))
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                Computed::table("kdet", entries)
            } else {
                let entries = xs
                    .map(|x| {
                        let d = bessel_fredholm_det(x, t)?;
                        Ok(Entry::new(x, d.value, d.error))
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                Computed::table("fredholm", entries)
            }
        }
        Command::Series => {
            let mut entries = Vec::new();
            let mut details = Vec::new();
            for x in xs {
                let r = theorem4_sum(&params, x, &opts)?;
                entries.push(Entry::new(x, r.value, r.error));
                details.push(json!({"x": x, "radii": r.radii, "terms": r.terms}));
            }
            let mut out = Computed::table("theorem4", entries);
            out.details = Value::Array(details);
            out
        }
        Command::Conjecture { s } => {
            let y = ParticleConfig::new(cfg.y.clone())?;
            let entries = s
                .iter()
                .map(|&s| {
                    let r = conjecture_partial_sum(cfg.delta, &y, s, cfg.t)?;
                    Ok(Entry::new(s, r.value, r.error).with("free_determinant", r.free_determinant))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            Computed::table("partial_sum", entries)
        }
        Command::Verify => {
            let results = verify::run_suite(cfg.seed);
            let passed = results.iter().all(|r| r.passed);
            let entries = results
                .iter()
                .map(|r| Entry::new(r.name, r.max_error, 0.0).with("tolerance", r.tolerance).with("passed", f64::from(u8::from(r.passed))))
                .collect();
            Computed { method: "identity_suite".into(), passed, entries, details: serde_json::to_value(&results).expect("serializable") }
        }
        Command::Plot { .. } => unreachable!("plot does not compute"),
    })
}

fn write_artifacts(out: &Path, stem: &str, record: &Record, json_text: &str) -> std::io::Result<Vec<String>> {
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut put = |ext: &str, text: &str| -> std::io::Result<()> {
        let path = out.join(format!("{stem}.{ext}"));
        std::fs::write(&path, text)?;
        files.push(path.display().to_string());
        Ok(())
    };
    put("json", json_text)?;
    put("csv", &record::to_csv(record))?;
    if let Some(svg) = record::to_svg(record) {
        put("svg", &svg)?;
    }
    Ok(files)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    if let Command::Plot { input } = &cli.command {
        let text = std::fs::read_to_string(input).map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
        let rec: Record = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", input.display())))?;
        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
        std::fs::create_dir_all(&cli.global.out)?;
        let csv = cli.global.out.join(format!("{stem}.csv"));
        std::fs::write(&csv, record::to_csv(&rec))?;
        let svg = record::to_svg(&rec).ok_or_else(|| Failure::Config("record has no numeric x values".into()))?;
        let svg_path = cli.global.out.join(format!("{stem}.svg"));
        std::fs::write(&svg_path, svg)?;
        println!("{}", json!({"outputs": [csv.display().to_string(), svg_path.display().to_string()]}));
        return Ok(true);
    }

    let file = match &cli.global.config {
        Some(path) => config::read_file(path)?,
        None => BTreeMap::new(),
    };
    let cfg = config::resolve(file, std::env::var(config::CACHE_ENV).ok(), overrides(&cli.global)?)?;
    let sub = name(&cli.command);
    let params = serde_json::to_value(&cfg).expect("serializable");
    let route = route(&cli.command);
    let run_id = record::run_id(sub, &params, &route);
    let started = record::now();

    let cache_dir = cfg.cache_dir.clone().filter(|_| !cli.global.no_cache);
    let cached = cache_dir.as_deref().and_then(|d| record::read_cache(d, &run_id));
    let cache_hit = cached.is_some();
    let json_text = match cached {
        Some(text) => text,
        None => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Failure::Config(e.to_string()))?;
            let computed = pool.install(|| compute(&cli.command, &cfg))?;
            let rec = Record {
                run_id: run_id.clone(),
                subcommand: sub.to_string(),
                params: params.clone(),
                method: computed.method,
                passed: computed.passed,
                entries: computed.entries,
                details: computed.details,
            };
            let text = rec.to_json();
            if let Some(dir) = &cache_dir {
                record::write_cache(dir, &run_id, &text)?;
            }
            text
        }
    };
    let rec: Record = serde_json::from_str(&json_text).map_err(|e| Failure::Io(e.to_string()))?;
    let stem = format!("{sub}-{}", &run_id[..12]);
    let outputs = write_artifacts(&cli.global.out, &stem, &rec, &json_text)?;
    let manifest = Manifest {
        run_id: &run_id,
        subcommand: sub,
        params: &params,
        route: &route,
        workers: cfg.workers,
        code_version: record::VERSION,
        started_unix: started,
        finished_unix: record::now(),
        cache_hit,
        outputs,
    };
    std::fs::write(
        cli.global.out.join(format!("{stem}.manifest.json")),
        serde_json::to_string_pretty(&manifest).expect("serializable") + "\n",
    )?;
    print!("{json_text}");
    Ok(rec.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let record = json!({"error": {"kind": "invalid_config", "message": e.to_string(), "exit_code": EXIT_CONFIG}});
            println!("{record}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(f) => {
            let (code, record) = f.report();
            println!("{record}");
            ExitCode::from(code)
        }
    }
}
