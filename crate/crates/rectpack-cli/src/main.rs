//! Command-line surface of the circle-packing toolkit.
//!
//! One subcommand per pipeline stage: exact restricted search and tables,
//! stochastic compaction with record checkpointing, δ-improvements, contact
//! solving, verification, record bookkeeping, the asymptotic squareness
//! bound, and SVG rendering.
//!
//! Every subcommand prints human-readable text by default and structured
//! JSON with `--json`. Failures write a machine-readable JSON object to
//! stderr and exit with: 1 for verification failures, 2 for usage or file
//! errors, 3 for solver failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rectpack::compactor::{restart_outcome, seed_for_restart, CompactorParams, RunRecord};
use rectpack::geom::{check_feasible, extract_bonds, is_jammed, measure, Packing};
use rectpack::improve::{apply_improvement, solve_contacts, ContactSystem, SolveError};
use rectpack::io::{packing_from_json, render_svg, write_table_csv, RenderOptions};
use rectpack::restricted::{
    best_in_rn, dimorphism_hybrid_scan, make_table, tuple_perimeter, Objective, RnTuple,
};
use rectpack::tolerances;
use rectpack::verify::{records_monotone, Record, RecordSource, RecordStore};

// ---------------------------------------------------------------------------
// Argument declarations
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "rectpack",
    version,
    about = "Minimum-perimeter packings of congruent circles in rectangles",
    propagate_version = true
)]
struct Cli {
    /// Emit machine-readable JSON on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    Perimeter,
    Area,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Objective {
        match o {
            ObjectiveArg::Perimeter => Objective::Perimeter,
            ObjectiveArg::Area => Objective::Area,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Exact best packing in the restricted family for one n.
    SearchRn {
        #[arg(long)]
        n: u32,
        #[arg(long, value_enum, default_value = "perimeter")]
        objective: ObjectiveArg,
    },
    /// Restricted optima for a range of n, as a table.
    Table {
        #[arg(long, default_value_t = 1)]
        from: u32,
        #[arg(long)]
        to: u32,
        /// Print rows in the paper's table style (star-marked hole counts).
        #[arg(long)]
        paper_format: bool,
        /// Worker threads (0 = rayon default). Output is identical for any
        /// job count.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Scan 1..=to for dimorphic or hybrid restricted optima.
    ScanDimorphism {
        #[arg(long)]
        to: u32,
    },
    /// Stochastic compaction search for one n.
    Compact {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1000)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the final RunRecord JSON here (checkpointed while running).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also merge the running best into this record database.
        #[arg(long)]
        records_dir: Option<PathBuf>,
        /// Contraction attempts per restart.
        #[arg(long, default_value_t = 40_000)]
        max_steps: usize,
        /// Worker threads (0 = rayon default). Output is identical for any
        /// job count.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Apply a width-reducing δ move to the best restricted packing of n.
    Improve {
        #[arg(long)]
        n: u32,
        /// δ index 1..=4.
        #[arg(long)]
        delta: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a contact system (JSON) from an initial packing (JSON).
    Solve {
        /// ContactSystem JSON file.
        #[arg(long)]
        system: PathBuf,
        /// Initial packing JSON file.
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a packing file: feasibility, bonds, rattlers, jamming.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        /// Feasibility tolerance.
        #[arg(long, default_value_t = tolerances::DEFAULT_FEASIBILITY)]
        tol: f64,
    },
    /// List the record database and optionally check monotonicity.
    Records(RecordsArgs),
    /// Asymptotic squareness: ε and L/S bounds for mean side m.
    Oler {
        #[arg(long)]
        m: f64,
    },
    /// Render a packing to SVG.
    Render {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Draw 1-based circle labels.
        #[arg(long)]
        labels: bool,
        /// Draw bond dots at contact points.
        #[arg(long)]
        bonds: bool,
    },
}

#[derive(Args)]
struct RecordsArgs {
    /// Record directory (default: $RECTPACK_RECORDS_DIR or ./records).
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Fail (exit 1) if best perimeters are not non-increasing in n.
    #[arg(long)]
    check_monotone: bool,
}

// ---------------------------------------------------------------------------
// Error plumbing
// ---------------------------------------------------------------------------

/// Failure category mapped to the documented exit codes.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn verification(message: String) -> Failure {
        Failure { code: 1, kind: "verification", message }
    }
    fn usage(message: String) -> Failure {
        Failure { code: 2, kind: "usage", message }
    }
    fn solver(message: String) -> Failure {
        Failure { code: 3, kind: "solver", message }
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure::usage(e.to_string())
    }
}

fn read_to_string(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_string(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

/// Atomic file replacement: write a sibling temporary, then rename over.
fn write_atomic(path: &Path, text: &str) -> Result<(), Failure> {
    let tmp = path.with_extension("tmp");
    write_string(&tmp, text)?;
    std::fs::rename(&tmp, path)
        .map_err(|e| Failure::usage(format!("cannot replace {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command, cli.json) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.message, "kind": f.kind }));
            ExitCode::from(f.code)
        }
    }
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

fn run(cmd: Command, as_json: bool) -> Result<(), Failure> {
    match cmd {
        Command::SearchRn { n, objective } => cmd_search_rn(n, objective.into(), as_json),
        Command::Table { from, to, paper_format, jobs } => {
            with_jobs(jobs, || cmd_table(from, to, paper_format, as_json))
        }
        Command::ScanDimorphism { to } => cmd_scan(to, as_json),
        Command::Compact { n, restarts, seed, out, records_dir, max_steps, jobs } => {
            with_jobs(jobs, || {
                cmd_compact(n, restarts, seed, out.as_deref(), records_dir, max_steps, as_json)
            })
        }
        Command::Improve { n, delta, out } => cmd_improve(n, delta, out.as_deref(), as_json),
        Command::Solve { system, init, out } => cmd_solve(&system, &init, out.as_deref(), as_json),
        Command::Verify { input, tol } => cmd_verify(&input, tol, as_json),
        Command::Records(args) => cmd_records(args, as_json),
        Command::Oler { m } => cmd_oler(m, as_json),
        Command::Render { input, out, labels, bonds } => {
            cmd_render(&input, &out, labels, bonds, as_json)
        }
    }
}

/// Runs `body` inside a rayon pool of the requested size (0 = default).
/// All parallel results in this crate are deterministic reductions, so the
/// job count never changes any output.
fn with_jobs<T>(jobs: usize, body: impl FnOnce() -> Result<T, Failure> + Send) -> Result<T, Failure>
where
    T: Send,
{
    if jobs == 0 {
        return body();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::usage(format!("cannot build thread pool: {e}")))?;
    pool.install(body)
}

fn tuple_line(t: &RnTuple) -> String {
    format!(
        "w={} h={} h-={} s={} s-={} v={}",
        t.w, t.h, t.hminus, t.s, t.sminus, t.v
    )
}

fn cmd_search_rn(n: u32, objective: Objective, as_json: bool) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::usage("n must be at least 1".into()));
    }
    let r = best_in_rn(n, objective);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&r).expect("serializable"));
        return Ok(());
    }
    let (x, y) = r.value.coeffs();
    println!("n = {n}, objective = {}", r.objective);
    println!("minimum = {x} + {y}·√3 = {:.12}", r.value.to_f64());
    for t in r.display_rows() {
        println!("  {}", tuple_line(&t));
    }
    println!(
        "regular = {}, dimorphic = {}, hybrid = {}",
        r.regular, r.dimorphic, r.hybrid
    );
    Ok(())
}

fn cmd_table(from: u32, to: u32, paper_format: bool, as_json: bool) -> Result<(), Failure> {
    if from == 0 || from > to {
        return Err(Failure::usage("table range must satisfy 1 <= from <= to".into()));
    }
    let groups = make_table(from, to, Objective::Perimeter);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&groups).expect("serializable"));
    } else if paper_format {
        // One line per n; star-marked v counts, like the paper's tables.
        for g in &groups {
            let rows: Vec<String> = g
                .rows
                .iter()
                .map(|t| {
                    let stars = if t.v > 0 { format!(" {}*", t.v) } else { String::new() };
                    format!("({},{},{},{}){stars}", t.w, t.h, t.hminus, t.s)
                })
                .collect();
            println!("{:>5}  P/r = {:<18.12} {}", g.n, g.value.to_f64(), rows.join("  "));
        }
    } else {
        print!("{}", write_table_csv(&groups));
    }
    Ok(())
}

fn cmd_scan(to: u32, as_json: bool) -> Result<(), Failure> {
    if to == 0 {
        return Err(Failure::usage("scan bound must be at least 1".into()));
    }
    let hits = dimorphism_hybrid_scan(to);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&hits).expect("serializable"));
        return Ok(());
    }
    for g in &hits {
        let kinds = match (g.dimorphic, g.hybrid) {
            (true, true) => "dimorphic+hybrid",
            (true, false) => "dimorphic",
            _ => "hybrid",
        };
        let rows: Vec<String> = g.rows.iter().map(|t| tuple_line(t)).collect();
        println!("{:>5}  {:<16} {}", g.n, kinds, rows.join(" | "));
    }
    println!("{} circle counts up to {to}", hits.len());
    Ok(())
}

fn cmd_compact(
    n: u32,
    restarts: usize,
    seed: u64,
    out: Option<&Path>,
    records_dir: Option<PathBuf>,
    max_steps: usize,
    as_json: bool,
) -> Result<(), Failure> {
    let params = CompactorParams { seed, restarts, max_steps, ..CompactorParams::default() };
    params.validate().map_err(|e| Failure::usage(e.to_string()))?;
    if n == 0 || restarts == 0 {
        return Err(Failure::usage("n and restarts must be at least 1".into()));
    }
    let store = match records_dir {
        Some(dir) => Some(RecordStore::open(&dir).map_err(|e| Failure::usage(e.to_string()))?),
        None => None,
    };

    // Restart batches: parallel inside a batch, a progress event and a
    // checkpoint after each. The reduction key (perimeter, restart index)
    // matches `search`, so the final record is bit-identical to one call.
    const BATCH: u64 = 256;
    let total = restarts as u64;
    let mut best: Option<(f64, u64, Packing)> = None;
    let mut done = 0u64;
    while done < total {
        let hi = (done + BATCH).min(total);
        use rayon::prelude::*;
        let batch: Result<Vec<(f64, u64, Packing)>, _> = (done..hi)
            .into_par_iter()
            .map(|idx| restart_outcome(n, &params, idx).map(|(p, pk)| (p, idx, pk)))
            .collect();
        let batch = batch.map_err(|e| Failure::solver(e.to_string()))?;
        for (per, idx, pk) in batch {
            let better = match &best {
                Some((bp, bi, _)) => per < *bp || (per == *bp && idx < *bi),
                None => true,
            };
            if better {
                best = Some((per, idx, pk));
            }
        }
        done = hi;
        let (bp, bi, bpk) = best.as_ref().expect("batch nonempty");
        let record = RunRecord {
            n,
            best_perimeter: *bp,
            best_packing: bpk.clone(),
            attempts: done as usize,
            seed_of_best: seed_for_restart(seed, *bi),
        };
        // Progress event: one JSON line per batch on stderr.
        eprintln!(
            "{}",
            json!({ "event": "progress", "attempts": done, "best_perimeter": bp })
        );
        if let Some(path) = out {
            write_atomic(path, &serde_json::to_string_pretty(&record).expect("serializable"))?;
        }
        if let Some(store) = &store {
            let rec = Record {
                n,
                perimeter: *bp,
                source: RecordSource::Compacted,
                exact_value: None,
                packing: Some(bpk.clone()),
            };
            store.merge(&rec).map_err(|e| Failure::usage(e.to_string()))?;
        }
    }

    let (bp, bi, bpk) = best.expect("restarts >= 1");
    let record = RunRecord {
        n,
        best_perimeter: bp,
        best_packing: bpk,
        attempts: restarts,
        seed_of_best: seed_for_restart(seed, bi),
    };
    if as_json {
        println!("{}", serde_json::to_string_pretty(&record).expect("serializable"));
    } else {
        println!(
            "n = {n}: best perimeter {:.12} after {restarts} restarts (restart seed {})",
            record.best_perimeter, record.seed_of_best
        );
        let m = measure(&record.best_packing);
        println!("  box {:.12} × {:.12}, L/S = {:.9}", m.width, m.height, m.l_over_s);
    }
    Ok(())
}

fn cmd_improve(n: u32, delta: u8, out: Option<&Path>, as_json: bool) -> Result<(), Failure> {
    let r = best_in_rn(n, Objective::Perimeter);
    let mut last_err: Option<String> = None;
    for t in r.display_rows().iter().chain(r.minimizers.iter()) {
        if t.v == 0 {
            continue;
        }
        match apply_improvement(t, delta) {
            Ok(p) => {
                let m = measure(&p);
                if let Some(path) = out {
                    write_string(path, &rectpack::io::packing_to_json(&p))?;
                }
                if as_json {
                    println!(
                        "{}",
                        json!({
                            "n": n,
                            "delta_index": delta,
                            "tuple": t,
                            "perimeter": m.perimeter,
                            "width": m.width,
                            "height": m.height,
                        })
                    );
                } else {
                    println!("n = {n}, δ{delta} applied to {}", tuple_line(t));
                    println!(
                        "  P/r = {:.12} (restricted optimum was {:.12})",
                        m.perimeter,
                        tuple_perimeter(t).to_f64()
                    );
                }
                return Ok(());
            }
            Err(e) => last_err = Some(e.to_string()),
        }
    }
    Err(Failure::solver(last_err.unwrap_or_else(|| {
        format!("no holed minimizer of n = {n} supports a δ{delta} move")
    })))
}

fn cmd_solve(system: &Path, init: &Path, out: Option<&Path>, as_json: bool) -> Result<(), Failure> {
    let sys: ContactSystem = serde_json::from_str(&read_to_string(system)?)
        .map_err(|e| Failure::usage(format!("bad contact system {}: {e}", system.display())))?;
    let start = packing_from_json(&read_to_string(init)?)
        .map_err(|e| Failure::usage(format!("bad packing {}: {e}", init.display())))?;
    let solved = solve_contacts(&sys, &start).map_err(|e| {
        let detail = match &e {
            SolveError::Singular { dependent, .. } => format!("{e}; dependent: {dependent:?}"),
            _ => e.to_string(),
        };
        Failure::solver(detail)
    })?;
    let m = measure(&solved);
    if let Some(path) = out {
        write_string(path, &rectpack::io::packing_to_json(&solved))?;
    }
    if as_json {
        println!(
            "{}",
            json!({ "width": m.width, "height": m.height, "perimeter": m.perimeter })
        );
    } else {
        println!(
            "solved: box {:.12} × {:.12}, P/r = {:.12}",
            m.width, m.height, m.perimeter
        );
    }
    Ok(())
}

fn cmd_verify(input: &Path, tol: f64, as_json: bool) -> Result<(), Failure> {
    let p = packing_from_json(&read_to_string(input)?)
        .map_err(|e| Failure::usage(format!("bad packing {}: {e}", input.display())))?;
    let report = check_feasible(&p, tol);
    let bonds = extract_bonds(&p, tolerances::DEFAULT_BOND);
    let jam = is_jammed(&p, tolerances::DEFAULT_BOND);
    let m = measure(&p);
    if as_json {
        println!(
            "{}",
            json!({
                "feasible": report.ok,
                "report": report,
                "measurements": m,
                "bond_pairs": bonds.pairs.len(),
                "bond_walls": bonds.walls.len(),
                "jammed": jam.jammed,
                "rattlers": jam.rattlers,
            })
        );
    } else {
        println!(
            "n = {}: box {:.12} × {:.12}, P/r = {:.12}",
            p.n, m.width, m.height, m.perimeter
        );
        println!(
            "feasible at {tol:e}: {} ({} pair, {} wall violations)",
            report.ok,
            report.pair_violations.len(),
            report.wall_violations.len()
        );
        println!(
            "bonds at {:e}: {} pairs, {} wall contacts",
            tolerances::DEFAULT_BOND,
            bonds.pairs.len(),
            bonds.walls.len()
        );
        println!("jammed: {} (rattlers: {:?})", jam.jammed, jam.rattlers);
    }
    if report.ok {
        Ok(())
    } else {
        Err(Failure::verification(format!(
            "{} pair and {} wall violations at tolerance {tol:e}",
            report.pair_violations.len(),
            report.wall_violations.len()
        )))
    }
}

fn records_dir(arg: Option<PathBuf>) -> PathBuf {
    arg.or_else(|| std::env::var_os("RECTPACK_RECORDS_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("records"))
}

fn cmd_records(args: RecordsArgs, as_json: bool) -> Result<(), Failure> {
    let dir = records_dir(args.dir);
    let store = RecordStore::open(&dir).map_err(|e| Failure::usage(e.to_string()))?;
    let records = store.all().map_err(|e| Failure::usage(e.to_string()))?;
    let violations = records_monotone(&records);
    if as_json {
        println!(
            "{}",
            json!({
                "dir": dir,
                "records": records,
                "monotonicity_violations": violations,
            })
        );
    } else {
        println!("{} records in {}", records.len(), dir.display());
        for r in &records {
            let exact = r
                .exact_value
                .map(|q| {
                    let (x, y) = q.coeffs();
                    format!(" = {x} + {y}·√3")
                })
                .unwrap_or_default();
            println!("  n = {:>5}: P/r = {:<18.12} [{}]{exact}", r.n, r.perimeter, r.source);
        }
        if args.check_monotone {
            println!("monotonicity violations: {violations:?}");
        }
    }
    if args.check_monotone && !violations.is_empty() {
        return Err(Failure::verification(format!(
            "record perimeters increase after n = {violations:?}"
        )));
    }
    Ok(())
}

fn cmd_oler(m: f64, as_json: bool) -> Result<(), Failure> {
    if !(m > 0.0) {
        return Err(Failure::usage("m must be positive".into()));
    }
    let b = rectpack::verify::oler_epsilon_bound(m);
    if as_json {
        println!("{}", serde_json::to_string_pretty(&b).expect("serializable"));
    } else {
        println!("mean side m = {m}");
        println!("ε ≤ {:.6}", b.epsilon_max);
        match b.ls_bound {
            Some(ls) => println!("L/S ≤ {ls:.6}"),
            None => println!("L/S unbounded at this m (m ≤ ε bound)"),
        }
    }
    Ok(())
}

fn cmd_render(
    input: &Path,
    out: &Path,
    labels: bool,
    bonds: bool,
    as_json: bool,
) -> Result<(), Failure> {
    let p = packing_from_json(&read_to_string(input)?)
        .map_err(|e| Failure::usage(format!("bad packing {}: {e}", input.display())))?;
    let svg = render_svg(&p, &RenderOptions { labels, bonds, ..RenderOptions::default() });
    write_string(out, &svg)?;
    if as_json {
        println!("{}", json!({ "out": out, "bytes": svg.len() }));
    } else {
        println!("wrote {} ({} bytes)", out.display(), svg.len());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_declaration_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn records_dir_precedence() {
        let explicit = records_dir(Some(PathBuf::from("/tmp/x")));
        assert_eq!(explicit, PathBuf::from("/tmp/x"));
    }
}
