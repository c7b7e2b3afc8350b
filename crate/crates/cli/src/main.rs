//! Command-line surface: compile pattern sets into matcher files, run
//! matching, generate random circuits, and benchmark with CSV output.
//!
//! Exit codes: 0 success, 1 usage, 2 input parse, 3 matcher format/version,
//! 4 internal invariant violation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use portmatch::circuit::{
    circuit_to_portgraph, emit_circuit, parse_circuit, random_circuit, GateSet,
};
use portmatch::{naive_match, Match, MatchOptions, Matcher, PortGraph};

#[derive(Parser)]
#[command(name = "portmatch", version, about = "Port graph pattern matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a pattern set (JSONL circuits) into a matcher file.
    Compile {
        /// Pattern file: one circuit JSON object per line.
        #[arg(long)]
        patterns: PathBuf,
        /// Output matcher file.
        #[arg(long)]
        out: PathBuf,
        /// Stored default for convex-only matching.
        #[arg(long, default_value_t = true)]
        convex_only: bool,
    },
    /// Match a subject circuit against a compiled matcher.
    Match {
        #[arg(long)]
        matcher: PathBuf,
        /// Subject circuit (JSON).
        #[arg(long)]
        subject: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
        /// Also report verified non-convex embeddings.
        #[arg(long)]
        allow_nonconvex: bool,
    },
    /// Generate seeded random circuits over the T, H, CX gate set.
    Gen {
        #[arg(long)]
        qubits: usize,
        #[arg(long)]
        gates: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Keep only circuits whose port graph is connected (resampling
        /// deterministically), so the output is usable as a pattern set.
        #[arg(long)]
        connected: bool,
    },
    /// Benchmark compile and query times over a grid of pattern counts.
    Bench {
        #[arg(long)]
        patterns: PathBuf,
        #[arg(long)]
        subject: PathBuf,
        /// Comma-separated pattern counts, e.g. 10,100,1000. An empty grid
        /// produces a header-only CSV.
        #[arg(long)]
        ell_grid: String,
        /// Enable the naive per-pattern baseline ("naive").
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long)]
        csv: PathBuf,
        /// Seed for the pattern-subset shuffle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Timed repetitions per cell (after one discarded warm-up).
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

enum CliError {
    Usage(String),
    Parse(String),
    Format(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Format(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Parse(m) | CliError::Format(m) | CliError::Internal(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Compile {
            patterns,
            out,
            convex_only,
        } => cmd_compile(&patterns, &out, convex_only),
        Command::Match {
            matcher,
            subject,
            format,
            allow_nonconvex,
        } => cmd_match(&matcher, &subject, format, allow_nonconvex),
        Command::Gen {
            qubits,
            gates,
            count,
            seed,
            out,
            connected,
        } => cmd_gen(qubits, gates, count, seed, &out, connected),
        Command::Bench {
            patterns,
            subject,
            ell_grid,
            baseline,
            csv,
            seed,
            reps,
        } => {
            let grid = parse_grid(&ell_grid)?;
            cmd_bench(&patterns, &subject, &grid, baseline.as_deref(), &csv, seed, reps)
        }
    }
}

fn parse_grid(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| CliError::Usage(format!("bad ell-grid entry {t:?}")))
        })
        .collect()
}

fn read_file(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Parse a JSONL pattern file into port graphs; errors carry line numbers.
fn load_patterns(path: &PathBuf, gs: &GateSet) -> Result<Vec<PortGraph>, CliError> {
    let text = read_file(path)?;
    let mut graphs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let circuit = parse_circuit(line, gs).map_err(|e| {
            CliError::Parse(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        let graph = circuit_to_portgraph(&circuit, gs).map_err(|e| {
            CliError::Parse(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        graphs.push(graph);
    }
    Ok(graphs)
}

fn load_subject(path: &PathBuf, gs: &GateSet) -> Result<PortGraph, CliError> {
    let text = read_file(path)?;
    let circuit = parse_circuit(text.trim(), gs)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    circuit_to_portgraph(&circuit, gs)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn cmd_compile(patterns: &PathBuf, out: &PathBuf, convex_only: bool) -> Result<(), CliError> {
    let gs = GateSet::standard();
    let graphs = load_patterns(patterns, &gs)?;
    let matcher = Matcher::compile_with_default(&graphs, convex_only)
        .map_err(|e| CliError::Parse(format!("{}: {e}", patterns.display())))?;
    let bytes = matcher.save();
    fs::write(out, &bytes).map_err(|e| CliError::Parse(format!("{}: {e}", out.display())))?;
    println!("patterns={}", graphs.len());
    let widths: Vec<String> = matcher
        .bucket_stats()
        .iter()
        .map(|(w, _, n)| format!("{w}:{n}"))
        .collect();
    println!("width_buckets={}", widths.join(","));
    let nodes: usize = matcher.bucket_stats().iter().map(|(_, n, _)| n).sum();
    println!("tree_nodes={nodes}");
    println!("fallback_patterns={}", matcher.fallback_count());
    println!("file_bytes={}", bytes.len());
    Ok(())
}

fn format_match(m: &Match, format: OutputFormat) -> String {
    let map: Vec<(usize, usize)> = m
        .embedding
        .vertex_map
        .iter()
        .map(|(p, s)| (p.0, s.0))
        .collect();
    match format {
        OutputFormat::Json => {
            let map_json: Vec<serde_json::Value> = map
                .iter()
                .map(|&(p, s)| serde_json::json!([p, s]))
                .collect();
            serde_json::json!({
                "pattern": m.pattern.0,
                "map": map_json,
                "convex": m.convex,
                "root_edge": m.root_edge.map(|e| e.0),
            })
            .to_string()
        }
        OutputFormat::Csv => {
            let pairs: Vec<String> = map.iter().map(|(p, s)| format!("{p}:{s}")).collect();
            format!(
                "{},{},{},{}",
                m.pattern.0,
                m.convex,
                m.root_edge.map(|e| e.0.to_string()).unwrap_or_default(),
                pairs.join(";")
            )
        }
    }
}

fn cmd_match(
    matcher_path: &PathBuf,
    subject: &PathBuf,
    format: OutputFormat,
    allow_nonconvex: bool,
) -> Result<(), CliError> {
    let bytes = fs::read(matcher_path)
        .map_err(|e| CliError::Format(format!("{}: {e}", matcher_path.display())))?;
    let matcher =
        Matcher::load(&bytes).map_err(|e| CliError::Format(format!("{}: {e}", matcher_path.display())))?;
    let gs = GateSet::standard();
    let g = load_subject(subject, &gs)?;
    let convex_only = if allow_nonconvex {
        false
    } else {
        matcher.convex_default()
    };
    let matches = matcher
        .find_matches(&g, MatchOptions { convex_only })
        .map_err(|e| CliError::Parse(format!("{}: {e}", subject.display())))?;
    if matches!(format, OutputFormat::Csv) {
        println!("pattern_id,convex,root_edge,vertex_map");
    }
    for m in &matches {
        println!("{}", format_match(m, format));
    }
    println!("n_matches={}", matches.len());
    Ok(())
}

fn cmd_gen(
    q: usize,
    gates: usize,
    count: usize,
    seed: u64,
    out: &PathBuf,
    connected: bool,
) -> Result<(), CliError> {
    let gs = GateSet::t_h_cx();
    let mut text = String::new();
    for i in 0..count {
        let base = seed.wrapping_add(i as u64);
        let mut c = random_circuit(q, gates, &gs, base).map_err(|e| CliError::Usage(e.to_string()))?;
        if connected {
            let mut attempt = 0u64;
            loop {
                let g = circuit_to_portgraph(&c, &gs).expect("generated circuits are valid");
                if g.num_vertices() > 0 && g.is_connected() {
                    break;
                }
                attempt += 1;
                if attempt > 10_000 {
                    return Err(CliError::Usage(format!(
                        "could not sample a connected {q}-qubit circuit with {gates} gates"
                    )));
                }
                c = random_circuit(q, gates, &gs, base.wrapping_add(attempt.wrapping_mul(0x9e3779b97f4a7c15)))
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
        }
        text.push_str(&emit_circuit(&c));
        text.push('\n');
    }
    fs::write(out, text).map_err(|e| CliError::Parse(format!("{}: {e}", out.display())))?;
    println!("circuits={count}");
    println!("file={}", out.display());
    Ok(())
}

/// splitmix64; used for the reproducible pattern-subset shuffle.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut state = seed;
    for i in (1..n).rev() {
        let j = (splitmix64(&mut state) % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

fn median_ms(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

fn cmd_bench(
    patterns_path: &PathBuf,
    subject_path: &PathBuf,
    ell_grid: &[usize],
    baseline: Option<&str>,
    csv_path: &PathBuf,
    seed: u64,
    reps: usize,
) -> Result<(), CliError> {
    if let Some(b) = baseline {
        if b != "naive" {
            return Err(CliError::Usage(format!("unknown baseline {b:?}")));
        }
    }
    let reps = reps.max(1);
    let gs = GateSet::standard();
    let patterns = load_patterns(patterns_path, &gs)?;
    let subject = load_subject(subject_path, &gs)?;
    for &ell in ell_grid {
        if ell > patterns.len() {
            return Err(CliError::Usage(format!(
                "ell={ell} exceeds the {} available patterns",
                patterns.len()
            )));
        }
    }

    let mut csv = String::from(
        "n_patterns,width,depth,compile_ms,query_ms,naive_ms,n_matches,subject_size,seed\n",
    );
    for &ell in ell_grid {
        let order = shuffled_indices(patterns.len(), seed);
        let subset: Vec<PortGraph> = order[..ell].iter().map(|&i| patterns[i].clone()).collect();

        let t0 = Instant::now();
        let matcher = Matcher::compile(&subset)
            .map_err(|e| CliError::Parse(format!("{}: {e}", patterns_path.display())))?;
        let compile_ms = t0.elapsed().as_secs_f64() * 1e3;

        let run_query = || {
            matcher
                .find_matches(&subject, MatchOptions { convex_only: true })
                .map_err(|e| CliError::Parse(format!("{}: {e}", subject_path.display())))
        };
        let warmup = run_query()?;
        let mut query_samples = Vec::with_capacity(reps);
        let mut matches = warmup;
        for _ in 0..reps {
            let t = Instant::now();
            matches = run_query()?;
            query_samples.push(t.elapsed().as_secs_f64() * 1e3);
        }
        let query_ms = median_ms(query_samples);

        let naive_ms = match baseline {
            Some(_) => {
                let run_naive = || {
                    let mut found = Vec::new();
                    for (pos, p) in subset.iter().enumerate() {
                        for m in naive_match(p, &subject) {
                            if m.convex {
                                found.push((pos as u32, m.embedding));
                            }
                        }
                    }
                    found
                };
                let naive_first = run_naive();
                let mut naive_samples = Vec::with_capacity(reps);
                for _ in 0..reps {
                    let t = Instant::now();
                    let _ = run_naive();
                    naive_samples.push(t.elapsed().as_secs_f64() * 1e3);
                }
                // Cross-check: both paths must report the same convex set.
                let fast: BTreeSet<(u32, portmatch::Embedding)> = matches
                    .iter()
                    .map(|m| (m.pattern.0, m.embedding.clone()))
                    .collect();
                let slow: BTreeSet<(u32, portmatch::Embedding)> = naive_first.into_iter().collect();
                if fast != slow {
                    return Err(CliError::Internal(format!(
                        "baseline mismatch at ell={ell}: {} vs {} matches",
                        fast.len(),
                        slow.len()
                    )));
                }
                format!("{:.3}", median_ms(naive_samples))
            }
            None => String::new(),
        };

        let width = subset.iter().map(|p| p.width()).max().unwrap_or(0);
        let depth = subset.iter().map(|p| p.metrics().depth).max().unwrap_or(0);
        writeln!(
            csv,
            "{ell},{width},{depth},{compile_ms:.3},{query_ms:.3},{naive_ms},{},{},{seed}",
            matches.len(),
            subject.num_vertices(),
        )
        .expect("writing to string");
        println!(
            "ell={ell} compile_ms={compile_ms:.3} query_ms={query_ms:.3} naive_ms={} n_matches={}",
            if naive_ms.is_empty() { "-" } else { &naive_ms },
            matches.len()
        );
    }
    fs::write(csv_path, csv).map_err(|e| CliError::Parse(format!("{}: {e}", csv_path.display())))?;
    println!("csv={}", csv_path.display());
    Ok(())
}
