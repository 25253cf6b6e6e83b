use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{ensure, Context, Result};
use erp_qpa::bank::load_bank_set;
use erp_qpa::bdrate::bd_rate;
use erp_qpa::format::sig6;
use erp_qpa::geometry::LatitudeGrid;
use erp_qpa::metrics::sequence_metrics;
use erp_qpa::qpa::{build_quality_map, mean_delta_q};
use erp_qpa::sim::simulate_bd_gain;
use erp_qpa::{QpaConfig, QualityMap, RdCurve, RdModel, VideoSpec};

use crate::{BankAction, BdrateArgs, Command, QmapArgs, SimulateArgs, WspsnrArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Qmap(args) => qmap(args),
        Command::Wspsnr(args) => wspsnr(args),
        Command::Bdrate(args) => bdrate(args),
        Command::Simulate(args) => simulate(args),
        Command::Bank { action } => bank(action),
    }
}

/// Output file, or stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn require_file(path: &Path) -> Result<()> {
    ensure!(path.is_file(), "{} is not a readable file", path.display());
    Ok(())
}

fn qmap(args: QmapArgs) -> Result<()> {
    let cfg = QpaConfig::new(args.lambda_min, args.lambda_max, args.q_num, args.q0)
        .context("invalid quality configuration")?;
    let map = build_quality_map(args.rows, &cfg, args.clamp)?;
    map.save(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    let mut out = io::stdout().lock();
    writeln!(out, "rows,{}", map.rows())?;
    writeln!(out, "min,{}", sig6(map.min()))?;
    writeln!(out, "max,{}", sig6(map.max()))?;
    writeln!(out, "mean,{}", sig6(map.mean()))?;
    writeln!(out, "mean_delta_q,{}", sig6(mean_delta_q(&cfg)))?;
    Ok(())
}

fn wspsnr(args: WspsnrArgs) -> Result<()> {
    let spec = VideoSpec::new(args.width, args.height, args.bit_depth, args.frames)?;
    require_file(&args.reference)?;
    require_file(&args.test)?;
    let report = sequence_metrics(&args.reference, &args.test, &spec)?;
    let mut out = sink(args.out.as_deref())?;
    report.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn read_curve(path: &Path) -> Result<RdCurve> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    RdCurve::parse(&text).with_context(|| format!("invalid curve {}", path.display()))
}

/// Signed percentage with two decimals; a value that rounds to zero prints as `0.00`.
fn percent(v: f64) -> String {
    let s = format!("{v:+.2}");
    if s == "+0.00" || s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn bdrate(args: BdrateArgs) -> Result<()> {
    let reference = read_curve(&args.ref_curve)?;
    let test = read_curve(&args.test_curve)?;
    let v = bd_rate(&reference, &test, args.method)?;
    println!("{}", percent(v));
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let model = RdModel::new(args.c, args.k)?;
    let grid = LatitudeGrid::new(args.bands)?;
    let report = simulate_bd_gain(&model, grid.latitudes(), &args.lambda0)?;
    match &args.out {
        Some(path) => {
            let mut out = sink(Some(path))?;
            report.write_csv(&mut out)?;
            out.flush()?;
            println!("bd_rate,{}", sig6(report.bd_rate));
        }
        None => {
            let mut out = sink(None)?;
            report.write_csv(&mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn write_row(out: &mut dyn Write, values: &[f32]) -> io::Result<()> {
    let line: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    writeln!(out, "{}", line.join(","))
}

fn bank(action: BankAction) -> Result<()> {
    match action {
        BankAction::Info { bank_file } => {
            let set = load_bank_set(&bank_file).with_context(|| format!("cannot load {}", bank_file.display()))?;
            let mut out = io::stdout().lock();
            writeln!(out, "q_num,{}", set.q_num())?;
            writeln!(out, "banks,4")?;
            for (kind, bank) in set.iter() {
                writeln!(out, "{kind},channels,{}", bank.channels())?;
            }
        }
        BankAction::Interp {
            bank_file,
            q_tilde,
            bank,
            out,
        } => {
            let set = load_bank_set(&bank_file).with_context(|| format!("cannot load {}", bank_file.display()))?;
            let v = set.bank(bank).interpolate(q_tilde)?;
            let mut w = sink(out.as_deref())?;
            write_row(&mut w, &v)?;
            w.flush()?;
        }
        BankAction::Rowmod {
            bank_file,
            qmap_file,
            bank,
            out,
        } => {
            let set = load_bank_set(&bank_file).with_context(|| format!("cannot load {}", bank_file.display()))?;
            let map = QualityMap::load(&qmap_file).with_context(|| format!("cannot load {}", qmap_file.display()))?;
            let matrix = set.bank(bank).row_modulation_matrix(&map)?;
            let mut w = sink(out.as_deref())?;
            for r in 0..matrix.rows() {
                write_row(&mut w, matrix.row(r))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
