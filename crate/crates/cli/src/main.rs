//! `tmatrix` — query the matrix, walk active sets, verify the identities.
//!
//! Exit codes: 0 on success (all claims pass for `verify`), 1 when `verify`
//! finds a violation, 2 on usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tmatrix::legendre::{self, ActiveSetRecord, SchemeTrace, VerificationReport};
use tmatrix::matrix::{self, ElementRecord};
use tmatrix::primes::DEFAULT_SEGMENT_SIZE;
use tmatrix::{Error, PrimeCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Parser)]
#[command(
    name = "tmatrix",
    version,
    about = "Matrix of scaled 6h±1 columns: elements, active sets and prime-gap verification",
    after_help = "Every flag can also be set through an environment variable with the \
                  TMATRIX_ prefix (TMATRIX_FORMAT, TMATRIX_JOBS, ...)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Table, env = "TMATRIX_FORMAT")]
    format: Format,

    /// Integers covered per sieve segment (multiple of 128)
    #[arg(long, global = true, default_value_t = DEFAULT_SEGMENT_SIZE, env = "TMATRIX_SEGMENT_SIZE")]
    segment_size: u64,

    /// Guard for m-ranged commands; also sizes the sieve budget
    #[arg(long, global = true, default_value_t = 50_000, env = "TMATRIX_MAX_M")]
    max_m: u64,

    /// Prime-cache file: loaded on start when present, saved on success
    #[arg(long, global = true, env = "TMATRIX_CACHE")]
    cache: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Value and classification of element (k; n)
    Element { k: u64, n: u64 },
    /// Defining/leading flags of element (k; n)
    Classify { k: u64, n: u64 },
    /// Defining elements of row k above a starting value
    Row {
        k: u64,
        /// Yield elements strictly greater than this value
        #[arg(long, default_value_t = 0)]
        from: u128,
        /// Number of elements to print
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Least defining element above b, in the row of the largest leading
    /// square at or below b
    UpperDefining { b: u128 },
    /// Active set H, critical element C and row indices for one m
    ActiveSet { m: u64 },
    /// Critical element C for one m
    Critical { m: u64 },
    /// Walk the active-set scheme for one m
    Scheme {
        m: u64,
        /// Print every step of the walk
        #[arg(long)]
        trace: bool,
    },
    /// Number of primes at or below x (decimal inputs are floored)
    Pi {
        #[arg(value_parser = parse_real_floor)]
        x: u64,
    },
    /// Check every per-m identity over a range of m
    Verify {
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
        /// Worker threads for the sweep
        #[arg(long, default_value_t = 1, env = "TMATRIX_JOBS")]
        jobs: u64,
    },
    /// Active-set records for a range of m
    Export {
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
    },
}

fn parse_real_floor(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let real: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !real.is_finite() || real < 0.0 {
        return Err(format!("`{s}` is not a non-negative real"));
    }
    if real >= u64::MAX as f64 {
        return Err(format!("`{s}` is out of range"));
    }
    Ok(real.floor() as u64)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn open_cache(cli: &Cli) -> Result<PrimeCache, Error> {
    let budget = cli
        .max_m
        .saturating_add(1)
        .saturating_mul(cli.max_m.saturating_add(1))
        .saturating_add(1 << 22)
        .max(cli.segment_size);
    if let Some(path) = &cli.cache {
        if path.exists() {
            match PrimeCache::load(path, cli.segment_size, budget) {
                Ok(cache) => return Ok(cache),
                Err(err) => eprintln!(
                    "warning: ignoring cache file {}: {err}",
                    path.display()
                ),
            }
        }
    }
    PrimeCache::with_config(cli.segment_size, budget)
}

fn check_m_guard(m: u64, max_m: u64) -> Result<(), Error> {
    if m > max_m {
        return Err(Error::Usage(format!(
            "m = {m} exceeds the configured guard --max-m {max_m}"
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let cache = open_cache(&cli)?;
    let format = cli.format;
    let mut exit = ExitCode::SUCCESS;

    match &cli.command {
        Command::Element { k, n } => {
            let record = matrix::element_record(&cache, *k, *n)?;
            print_elements(format, &[record]);
        }
        Command::Classify { k, n } => {
            let cls = matrix::classify(&cache, *k, *n)?;
            match format {
                Format::Table => println!(
                    "a({k};{n}): {}, {}",
                    if cls.defining { "defining" } else { "not defining" },
                    if cls.leading { "leading" } else { "not leading" }
                ),
                Format::Json => println!("{}", json(&cls)),
                Format::Csv => {
                    println!("k,n,defining,leading");
                    println!("{k},{n},{},{}", cls.defining, cls.leading);
                }
            }
        }
        Command::Row { k, from, count } => {
            let records: Vec<ElementRecord> =
                matrix::row_defining_iter(&cache, *k, *from)?.take(*count).collect();
            print_elements(format, &records);
        }
        Command::UpperDefining { b } => {
            let ud = matrix::upper_defining(&cache, *b)?;
            match format {
                Format::Table => println!("D({b}) = {} [row {}]", ud.value, ud.row),
                Format::Json => println!("{}", json(&ud)),
                Format::Csv => {
                    println!("b,row,value");
                    println!("{b},{},{}", ud.row, ud.value);
                }
            }
        }
        Command::ActiveSet { m } => {
            check_m_guard(*m, cli.max_m)?;
            let (record, _) = legendre::scheme_walk(&cache, *m)?;
            match format {
                Format::Table => println!("{}", record_line(&record)),
                Format::Json => println!("{}", json(&record)),
                Format::Csv => {
                    println!("m,k1,q,H,C,k1_next");
                    println!("{}", record_csv(&record));
                }
            }
        }
        Command::Critical { m } => {
            check_m_guard(*m, cli.max_m)?;
            let (record, _) = legendre::scheme_walk(&cache, *m)?;
            match format {
                Format::Table => println!("{}", record.c),
                Format::Json => {
                    #[derive(Serialize)]
                    struct Critical {
                        m: u64,
                        critical: String,
                    }
                    println!(
                        "{}",
                        json(&Critical {
                            m: *m,
                            critical: record.c.to_string()
                        })
                    );
                }
                Format::Csv => {
                    println!("m,critical");
                    println!("{m},{}", record.c);
                }
            }
        }
        Command::Scheme { m, trace } => {
            check_m_guard(*m, cli.max_m)?;
            let (record, walk) = legendre::scheme_walk(&cache, *m)?;
            print_scheme(format, &record, &walk, *trace);
        }
        Command::Pi { x } => match format {
            Format::Table => println!("{}", cache.pi(*x)?),
            Format::Json => {
                #[derive(Serialize)]
                struct Pi {
                    x: u64,
                    pi: u64,
                }
                println!("{}", json(&Pi { x: *x, pi: cache.pi(*x)? }));
            }
            Format::Csv => {
                println!("x,pi");
                println!("{x},{}", cache.pi(*x)?);
            }
        },
        Command::Verify { from, to, jobs } => {
            check_m_guard(*to, cli.max_m)?;
            let report = legendre::verify_range(&cache, *from, *to, *jobs)?;
            print_report(format, &report);
            if !report.all_passed() {
                if let Some(v) = &report.first_violation {
                    eprintln!(
                        "violation at m = {}: claim {} expected {}, got {}",
                        v.m,
                        v.claim.name(),
                        v.expected,
                        v.actual
                    );
                    // Emit the full certificate of the failing m.
                    if let Ok((record, walk)) = legendre::scheme_walk(&cache, v.m) {
                        eprintln!("{}", record_line(&record));
                        for step in &walk.steps {
                            eprintln!(
                                "  {} -> {}  {:<13} {}",
                                step.from_row,
                                step.to_row,
                                step.label.name(),
                                step.value
                            );
                        }
                    }
                }
                exit = ExitCode::from(1);
            }
        }
        Command::Export { from, to } => {
            check_m_guard(*to, cli.max_m)?;
            if *from < 3 || from > to {
                return Err(Error::Usage(format!(
                    "export range must satisfy 3 <= from <= to, got [{from}, {to}]"
                )));
            }
            cache.ensure((to + 1).saturating_mul(to + 1).saturating_add(1 << 16))?;
            let mut records = Vec::with_capacity((to - from + 1) as usize);
            for m in *from..=*to {
                records.push(legendre::scheme_walk(&cache, m)?.0);
            }
            match format {
                Format::Table => {
                    for record in &records {
                        println!("{}", record_line(record));
                    }
                }
                Format::Json => println!("{}", json(&records)),
                Format::Csv => {
                    println!("m,k1,q,H,C,k1_next");
                    for record in &records {
                        println!("{}", record_csv(record));
                    }
                }
            }
        }
    }

    if let Some(path) = &cli.cache {
        if let Err(err) = cache.save(path) {
            eprintln!("warning: could not save cache file {}: {err}", path.display());
        }
    }
    Ok(exit)
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report types serialize infallibly")
}

fn flags_of(record: &ElementRecord) -> String {
    match (record.is_defining, record.is_leading) {
        (true, true) => "defining, leading".into(),
        (true, false) => "defining".into(),
        (false, true) => "leading".into(),
        (false, false) => "not defining".into(),
    }
}

fn print_elements(format: Format, records: &[ElementRecord]) {
    match format {
        Format::Table => {
            for r in records {
                println!("a({};{}) = {} [{}]", r.index.k, r.index.n, r.value, flags_of(r));
            }
        }
        Format::Json => println!("{}", json(&records)),
        Format::Csv => {
            println!("k,n,value,defining,leading");
            for r in records {
                println!(
                    "{},{},{},{},{}",
                    r.index.k, r.index.n, r.value, r.is_defining, r.is_leading
                );
            }
        }
    }
}

fn record_line(record: &ActiveSetRecord) -> String {
    let h: Vec<String> = record.h.iter().map(|v| v.to_string()).collect();
    format!(
        "m={} k1={} q={} H=[{}] C={} k1_next={}",
        record.m,
        record.k1,
        record.q,
        h.join(", "),
        record.c,
        record.k1_next
    )
}

fn record_csv(record: &ActiveSetRecord) -> String {
    let h: Vec<String> = record.h.iter().map(|v| v.to_string()).collect();
    format!(
        "{},{},{},{},{},{}",
        record.m,
        record.k1,
        record.q,
        h.join(";"),
        record.c,
        record.k1_next
    )
}

fn print_scheme(format: Format, record: &ActiveSetRecord, walk: &SchemeTrace, trace: bool) {
    match format {
        Format::Table => {
            println!("{}", record_line(record));
            if trace {
                for step in &walk.steps {
                    println!(
                        "  {} -> {}  {:<13} {}",
                        step.from_row,
                        step.to_row,
                        step.label.name(),
                        step.value
                    );
                }
            }
            println!("terminal leading: {}", walk.terminal_leading);
        }
        Format::Json => {
            #[derive(Serialize)]
            struct SchemeOutput<'a> {
                record: &'a ActiveSetRecord,
                trace: &'a SchemeTrace,
            }
            println!("{}", json(&SchemeOutput { record, trace: walk }));
        }
        Format::Csv => {
            println!("from_row,to_row,value,label");
            for step in &walk.steps {
                println!(
                    "{},{},{},{}",
                    step.from_row,
                    step.to_row,
                    step.value,
                    step.label.name()
                );
            }
        }
    }
}

fn print_report(format: Format, report: &VerificationReport) {
    match format {
        Format::Table => {
            println!("verify m in [{}, {}]", report.range.from, report.range.to);
            for (claim, status) in &report.claims {
                println!("  {:<24} {:?}", claim.name(), status);
            }
            if !report.degenerate_q1.is_empty() {
                println!("  degenerate q=1 at m: {:?}", report.degenerate_q1);
            }
            match &report.first_violation {
                None => println!("result: all claims hold ({} ms)", report.elapsed_ms),
                Some(v) => println!(
                    "result: FAILED at m = {} ({}) ({} ms)",
                    v.m,
                    v.claim.name(),
                    report.elapsed_ms
                ),
            }
        }
        Format::Json => println!("{}", json(report)),
        Format::Csv => {
            println!("claim,status");
            for (claim, status) in &report.claims {
                println!("{},{}", claim.name(), format!("{status:?}").to_lowercase());
            }
        }
    }
}
