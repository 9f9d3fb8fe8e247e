use std::fs;
use std::path::{Path, PathBuf};

use docslim::aps::{aps as slim, overlay, ApsReport};
use docslim::bench::{run_aps_bench, run_dts_bench, BenchReport};
use docslim::dts::{dts_detailed, DtsSidecar};
use docslim::flexres::{flexible_resize, target_dims};
use docslim::io::{load_rgb, read_json, read_tokens, save_rgb, write_csv_tokens, write_dstk, write_json};
use docslim::synth::{gen_document, gen_tokens, CorpusSpec};
use rayon::prelude::*;

use crate::exit::{Failure, BAD_ARGS, IO};
use crate::{ApsArgs, BenchCommand, DtsArgs, Outputs, ResizeArgs, SynthArgs};

type CmdResult = Result<(), Failure>;

/// Output path for each input, in input order.
fn output_paths(inputs: &[PathBuf], out: &Outputs) -> Result<Vec<PathBuf>, Failure> {
    match (&out.output, &out.out_dir) {
        (Some(o), None) if inputs.len() == 1 => Ok(vec![o.clone()]),
        (Some(_), None) => Err(Failure::new(
            BAD_ARGS,
            "--output takes a single input; use --out-dir for several",
        )),
        (None, Some(dir)) => {
            fs::create_dir_all(dir).map_err(|e| Failure::new(IO, format!("{}: {e}", dir.display())))?;
            let mut seen = std::collections::HashSet::new();
            inputs
                .iter()
                .map(|p| {
                    let name = p
                        .file_name()
                        .ok_or_else(|| Failure::new(BAD_ARGS, format!("{} has no file name", p.display())))?;
                    if !seen.insert(name.to_owned()) {
                        return Err(Failure::new(
                            BAD_ARGS,
                            format!("two inputs share the file name {}", name.to_string_lossy()),
                        ));
                    }
                    Ok(dir.join(name))
                })
                .collect()
        }
        _ => Err(Failure::new(BAD_ARGS, "one of --output or --out-dir is required")),
    }
}

fn check_not_input(inputs: &[PathBuf], outputs: &[PathBuf]) -> CmdResult {
    for o in outputs {
        if inputs.iter().any(|i| same_file(i, o)) {
            return Err(Failure::new(
                BAD_ARGS,
                format!("refusing to overwrite input {}", o.display()),
            ));
        }
    }
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Runs `f` over every (input, output) pair in parallel and returns the
/// per-item results in input order. Every item runs even if others fail.
fn batch<T: Send>(
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    f: impl Fn(&Path, &Path) -> Result<T, Failure> + Sync,
) -> Result<Vec<T>, Failure> {
    let results: Vec<Result<T, Failure>> = inputs
        .par_iter()
        .zip(outputs.par_iter())
        .map(|(i, o)| f(i, o))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut first_err = None;
    for (r, input) in results.into_iter().zip(inputs) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                if inputs.len() > 1 {
                    log::error!("{}: {e}", input.display());
                }
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(ok),
    }
}

fn overlay_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().unwrap_or_default().to_string_lossy();
    output.with_file_name(format!("{stem}.overlay.png"))
}

pub fn aps(args: ApsArgs) -> CmdResult {
    let params = args.opts.params();
    params.validate()?;
    let outputs = output_paths(&args.inputs, &args.out)?;
    check_not_input(&args.inputs, &outputs)?;
    let reports = batch(&args.inputs, &outputs, |input, output| {
        let img = load_rgb(input)?;
        let res = slim(&img, &params)?;
        save_rgb(&res.image, output)?;
        if args.visualize {
            save_rgb(&overlay(&img, &res.row_bands, &res.col_bands), overlay_path(output))?;
        }
        log::info!(
            "{}: {}x{} -> {}x{} ({:.1}% removed)",
            input.display(),
            img.height(),
            img.width(),
            res.image.height(),
            res.image.width(),
            100.0 * res.reduction
        );
        Ok(ApsReport::new(input.display().to_string(), &img, &res))
    })?;
    if let Some(path) = &args.report {
        match reports.as_slice() {
            [one] => write_json(one, path)?,
            many => write_json(&many, path)?,
        }
    }
    Ok(())
}

pub fn resize(args: ResizeArgs) -> CmdResult {
    let outputs = output_paths(&args.inputs, &args.out)?;
    check_not_input(&args.inputs, &outputs)?;
    batch(&args.inputs, &outputs, |input, output| {
        let img = load_rgb(input)?;
        let (h, w, _) = target_dims(img.height(), img.width(), &args.max_size);
        if (h, w) == (img.height(), img.width()) {
            // Under the cap: copy the file byte for byte.
            fs::copy(input, output).map_err(|e| Failure::new(IO, format!("{}: {e}", output.display())))?;
            return Ok(());
        }
        let (out, _) = flexible_resize(&img, &args.max_size)?;
        save_rgb(&out, output)?;
        Ok(())
    })?;
    Ok(())
}

pub fn dts(args: DtsArgs) -> CmdResult {
    let params = args.opts.params();
    params.validate()?;
    let v = read_tokens(&args.input)?;
    let vp = args.projected.as_ref().map(read_tokens).transpose()?;
    let run = dts_detailed(&v, vp.as_ref(), &params)?;
    let is_csv = args
        .output
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        write_csv_tokens(&run.result.tokens, &args.output)?;
    } else {
        write_dstk(&run.result.tokens, &args.output)?;
    }
    let sidecar = args.sidecar.unwrap_or_else(|| args.output.with_extension("json"));
    write_json(&DtsSidecar::new(&run.result, params.seed), &sidecar)?;
    log::info!(
        "{}: {} -> {} tokens",
        args.input.display(),
        run.result.input_len(),
        run.result.kept_idx.len()
    );
    Ok(())
}

pub fn synth(args: SynthArgs) -> CmdResult {
    let spec: CorpusSpec = read_json(&args.spec)?;
    let pages = spec.page_specs()?;
    let tokens = spec.token_specs();
    // Validate everything before writing anything.
    for p in &pages {
        p.validate()?;
    }
    for t in &tokens {
        t.validate()?;
    }
    fs::create_dir_all(&args.out_dir).map_err(|e| Failure::new(IO, format!("{}: {e}", args.out_dir.display())))?;
    let dir = &args.out_dir;
    pages
        .par_iter()
        .enumerate()
        .try_for_each(|(i, p)| -> CmdResult {
            let (img, truth) = gen_document(p)?;
            save_rgb(&img, dir.join(format!("page_{i:04}.png")))?;
            write_json(&truth, dir.join(format!("page_{i:04}.json")))?;
            Ok(())
        })?;
    tokens
        .par_iter()
        .enumerate()
        .try_for_each(|(i, t)| -> CmdResult {
            let (m, truth) = gen_tokens(t)?;
            write_dstk(&m, dir.join(format!("tokens_{i:04}.dstk")))?;
            write_json(&truth, dir.join(format!("tokens_{i:04}.json")))?;
            Ok(())
        })?;
    println!("wrote {} pages and {} token instances to {}", pages.len(), tokens.len(), dir.display());
    Ok(())
}

fn print_summary(r: &BenchReport) {
    let a = &r.aggregate;
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    println!("method {}  items {}  skipped {}", r.method, a.items, r.skipped);
    if a.pixel_reduction.is_some() {
        println!(
            "pixel_reduction {}  band_recall {}  line_precision {}  content_lines_removed {}",
            fmt(a.pixel_reduction),
            fmt(a.band_recall),
            fmt(a.line_precision),
            fmt(a.content_lines_removed)
        );
    }
    if a.token_reduction.is_some() {
        println!(
            "token_reduction {}  len {} -> {}  content_retention {}  baseline_retention {}",
            fmt(a.token_reduction),
            fmt(a.avg_token_len_before),
            fmt(a.avg_token_len_after),
            fmt(a.content_retention),
            fmt(a.baseline_content_retention)
        );
    }
    println!("wall_time_ms {}", fmt(a.wall_time_ms));
}

pub fn bench(which: BenchCommand) -> CmdResult {
    let (report, json, csv) = match which {
        BenchCommand::Aps {
            corpus,
            report,
            csv,
            opts,
        } => (run_aps_bench(&corpus, &opts.params())?, report, csv),
        BenchCommand::Dts {
            corpus,
            baseline,
            report,
            csv,
            opts,
        } => (run_dts_bench(&corpus, &opts.params(), baseline)?, report, csv),
    };
    if let Some(p) = json {
        write_json(&report, p)?;
    }
    if let Some(p) = csv {
        report.write_csv(p)?;
    }
    print_summary(&report);
    Ok(())
}
