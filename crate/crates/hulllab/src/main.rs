use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use hulllab::hull::{
    check_h_convexity, check_lambda_convexity_u, classify, gap_probe, gamma_star, h_gamma,
    in_upper, GapVerdict, Verdict,
};
use hulllab::io::{read_state_doc, write_cloud_csv, StateDoc};
use hulllab::laminates::decompose;
use hulllab::numeric::nuclear_norm;
use hulllab::sampler::{boundary_state, monte_carlo_classify, stream, Region};
use hulllab::state::{g_defect, in_k, m0, ohm_defect, Params, State};

/// Pointwise laboratory for the two estimates of the relaxed ideal MHD
/// constraint set: laminate decomposition (lower), nuclear-norm set and
/// convex certificates (upper), Monte Carlo classification, and gap
/// probing on the upper boundary.
#[derive(Parser)]
#[command(name = "hulllab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonState {
    /// Path to a JSON state document {alpha, beta, M, params{r,s,p}}.
    #[arg(long)]
    input: PathBuf,
    /// Membership tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a single state against both estimates.
    Check {
        #[command(flatten)]
        common: CommonState,
    },
    /// Decompose a state into a laminate tree with leaves in K.
    Decompose {
        #[command(flatten)]
        common: CommonState,
    },
    /// Run randomized verification suites for the convex certificates.
    Verify {
        /// Suite: h-convexity, lambda-convexity, or all.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Classify a Monte Carlo cloud of states.
    Sample {
        /// Region: kpoints, laminates, boundary, or file.
        #[arg(long, default_value = "kpoints")]
        region: String,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Cloud input (required for --region file).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write the classified cloud here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format: csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Sphere radii and pressure offset.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
    },
    /// Probe upper-boundary samples for the gap between the estimates.
    Gap {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
    },
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Honor HULLLAB_THREADS when the parallel runtime is compiled in.
fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Ok(var) = std::env::var("HULLLAB_THREADS") {
        if let Ok(threads) = var.parse::<usize>() {
            if threads > 0 {
                // Ignore the error if a global pool already exists.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

fn load_state(common: &CommonState) -> Result<StateDoc, String> {
    let text = fs::read_to_string(&common.input)
        .map_err(|e| format!("reading {}: {e}", common.input.display()))?;
    read_state_doc(&text).map_err(|e| format!("parsing {}: {e}", common.input.display()))
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Check { common } => {
            let doc = load_state(&common)?;
            let (z, params, tol) = (doc.state, doc.params, common.tol);
            let verdict = classify(&z, &params, tol);
            let defect = m0(&z, &params);
            let report = json!({
                "verdict": verdict,
                "tag": verdict.tag(),
                "in_k": in_k(&z, &params, tol),
                "in_upper_closed": in_upper(&z, &params, tol, true),
                "in_upper_open": in_upper(&z, &params, tol, false),
                "nuclear_norm": nuclear_norm(&defect).ok(),
                "g_defect": g_defect(&z, &params).ok(),
                "ohm_defect": ohm_defect(&z),
                "gamma_star": gamma_star(&z, &params).ok(),
                "h_gamma_star": gamma_star(&z, &params)
                    .ok()
                    .and_then(|g| h_gamma(&z, g, &params).ok()),
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            let bad = matches!(verdict, Verdict::OutsideUpper | Verdict::OffOhmManifold);
            Ok(if bad { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Decompose { common } => {
            let doc = load_state(&common)?;
            match decompose(&doc.state, &doc.params, common.tol) {
                Ok(tree) => {
                    let (recombined, leaves) = tree.recombine();
                    let report = json!({
                        "tree": &tree,
                        "leaf_count": tree.leaf_count(),
                        "depth": tree.depth(),
                        "weights": leaves.iter().map(|(_, w)| *w).collect::<Vec<_>>(),
                        "recombination_error": recombined.sub(&doc.state).norm(),
                    });
                    println!("{}", serde_json::to_string_pretty(&report).unwrap());
                    Ok(ExitCode::SUCCESS)
                }
                Err(err) => {
                    let report = json!({ "error": &err, "message": err.to_string() });
                    println!("{}", serde_json::to_string_pretty(&report).unwrap());
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Verify { suite, n, seed } => {
            let params = Params::unit();
            let mut failed = false;
            let mut ran = false;
            if suite == "h-convexity" || suite == "all" {
                ran = true;
                let report = check_h_convexity(&params, n, seed);
                let ok = report.is_clean();
                failed |= !ok;
                println!(
                    "h-convexity: {} ({} checked, {} violations)",
                    if ok { "pass" } else { "fail" },
                    report.checked,
                    report.violations.len()
                );
            }
            if suite == "lambda-convexity" || suite == "all" {
                ran = true;
                let report = check_lambda_convexity_u(&params, n, seed);
                let ok = report.is_clean();
                failed |= !ok;
                println!(
                    "lambda-convexity: {} ({} checked, {} violations)",
                    if ok { "pass" } else { "fail" },
                    report.checked,
                    report.violations.len()
                );
            }
            if !ran {
                return Err(format!("unknown suite '{suite}'"));
            }
            Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Sample { region, n, seed, tol, input, out, format, r, s, p } => {
            let params = Params::new(r, s, p).map_err(|e| e.to_string())?;
            let region = parse_region(&region, input.as_deref())?;
            let report =
                monte_carlo_classify(&params, n, seed, tol, &region).map_err(|e| e.to_string())?;
            let body = match format.as_str() {
                "csv" => {
                    let mut buf = Vec::new();
                    write_cloud_csv(&mut buf, &report.rows).map_err(|e| e.to_string())?;
                    String::from_utf8(buf).unwrap()
                }
                "json" => serde_json::to_string_pretty(&report).unwrap(),
                other => return Err(format!("unknown format '{other}'")),
            };
            match out {
                Some(path) => {
                    let mut file = fs::File::create(&path)
                        .map_err(|e| format!("creating {}: {e}", path.display()))?;
                    file.write_all(body.as_bytes())
                        .map_err(|e| format!("writing {}: {e}", path.display()))?;
                    println!("{}", serde_json::to_string_pretty(&report.counts).unwrap());
                }
                None => print!("{body}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gap { n, seed, tol, out, r, s, p } => {
            let params = Params::new(r, s, p).map_err(|e| e.to_string())?;
            let mut probes = Vec::new();
            let (mut gap_points, mut first_order, mut inconclusive) = (0usize, 0usize, 0usize);
            for i in 0..n as u64 {
                let mut rng = stream(seed, i);
                let Some(z) = (0..200).find_map(|_| boundary_state(&params, &mut rng)) else {
                    continue;
                };
                let Ok(probe) = gap_probe(&z, &params, tol) else { continue };
                match probe.verdict {
                    GapVerdict::GapPoint => gap_points += 1,
                    GapVerdict::FirstOrder => first_order += 1,
                    GapVerdict::Inconclusive => inconclusive += 1,
                }
                probes.push(json!({ "state": z, "probe": probe }));
            }
            let summary = json!({
                "probed": probes.len(),
                "gap_points": gap_points,
                "first_order": first_order,
                "inconclusive": inconclusive,
            });
            if let Some(path) = out {
                let body = serde_json::to_string_pretty(&json!({
                    "summary": summary,
                    "probes": probes,
                }))
                .unwrap();
                fs::write(&path, body).map_err(|e| format!("writing {}: {e}", path.display()))?;
            }
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[derive(Deserialize)]
struct CloudFile {
    params: Option<Params>,
    states: Vec<State>,
}

fn parse_region(name: &str, input: Option<&std::path::Path>) -> Result<Region, String> {
    match name {
        "kpoints" => Ok(Region::KPoints),
        "laminates" => Ok(Region::Laminates),
        "boundary" => Ok(Region::Boundary),
        "file" => {
            let path = input.ok_or("--region file requires --input")?;
            let text = fs::read_to_string(path)
                .map_err(|e| format!("reading {}: {e}", path.display()))?;
            let cloud: CloudFile = serde_json::from_str(&text)
                .map_err(|e| format!("parsing {}: {e}", path.display()))?;
            let _ = cloud.params; // radii come from the CLI flags
            Ok(Region::Cloud(cloud.states))
        }
        other => Err(format!("unknown region '{other}'")),
    }
}
