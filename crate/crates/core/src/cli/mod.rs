//! Command-line front end: `rectify`, `inspect`, `selftest`, `synth`.
//!
//! Exit codes are [`EXIT_OK`], [`EXIT_SELFTEST`], [`EXIT_VALIDATION`] and
//! [`EXIT_DEGENERATE`]. Every failure prints one line on stderr.

pub mod overlay;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{
    decode_netpbm, decode_weights, export_grid_json, grid_from_json, load_image, load_weights,
    save_image, save_rgb_image, save_weights, GridDocument, MAGIC,
};
use crate::net::{
    manifest, rectifier_forward, rectifier_parameter_count, ParamSpec, WeightStore, ENCODED_H,
    ENCODED_W, FEATURE_H, FEATURE_W, INPUT_H, INPUT_W,
};
use crate::synth::{stripe_image, StripeParams};
use crate::tensor::Tensor;
use crate::tps::{
    make_grid, solve_transform, DEFAULT_BETA, DEFAULT_COLS, DEFAULT_LAMBDA, DEFAULT_ROWS,
};
use crate::tps_pp::{build_sampling_grid, warp, AttentionMatrix, BorderPolicy, SamplingGrid};
use crate::verify::{SelfTest, SuiteReport, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFTEST: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

/// Tensor name holding the feature map in `--features` files.
pub const FEATURES_TENSOR: &str = "features";

/// `ROWSxCOLS`, also accepting `×`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extent {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for Extent {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (r, c) = s
            .split_once(['x', 'X', '×'])
            .ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{v}` is not a count"))
        };
        let (rows, cols) = (parse(r)?, parse(c)?);
        if rows == 0 || cols == 0 {
            return Err(format!("extent {rows}x{cols} is empty"));
        }
        Ok(Extent { rows, cols })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tpspp",
    version,
    about = "Attention-weighted thin-plate-spline rectification"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Warp an image or feature map with explicit or predicted control points.
    Rectify(RectifyArgs),
    /// Describe a weights, image, or grid file, or print the weight manifest.
    Inspect(InspectArgs),
    /// Run every invariant suite and print a pass/fail table.
    Selftest(SelftestArgs),
    /// Write a seeded sinusoid-stripe test image and matching inputs.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    /// Input image (PGM or PPM).
    #[arg(
        long,
        required_unless_present = "features",
        conflicts_with = "features"
    )]
    pub image: Option<PathBuf>,
    /// Input feature map: a TPSW file holding a C×H×W tensor named `features`.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Control points and attention as JSON.
    #[arg(long, required_unless_present = "weights", conflicts_with = "weights")]
    pub points: Option<PathBuf>,
    /// Network weights; control points and attention come from a forward pass.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `<stem>_points.ppm` and `<stem>_grid.ppm` beside the output.
    #[arg(long)]
    pub overlay: bool,
    /// Control lattice; must agree with the points file or the network.
    #[arg(long)]
    pub grid: Option<Extent>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value = "zeros")]
    pub border: BorderPolicy,
    /// Output extent; defaults to the source size for images and 16x64 for
    /// feature maps.
    #[arg(long)]
    pub out_size: Option<Extent>,
    /// Accepted for symmetry with the other subcommands; rectification is
    /// fully determined by its inputs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(required_unless_present = "manifest")]
    pub path: Option<PathBuf>,
    /// Print every weight name and shape the network reads, as JSON.
    #[arg(long)]
    pub manifest: bool,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Run only the named suites.
    #[arg(long = "suite")]
    pub suites: Vec<String>,
    /// Worker threads for data-parallel stages; 0 uses the default pool.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Peak vertical displacement in pixels.
    #[arg(long, default_value_t = StripeParams::default().amplitude)]
    pub amplitude: f64,
    #[arg(long, default_value_t = StripeParams::default().periods)]
    pub periods: f64,
    #[arg(long, default_value_t = StripeParams::default().noise)]
    pub noise: f32,
    /// Also write the counter-displacement control points as JSON.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Also write a complete seeded weights file.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Make the weights file all zeros.
    #[arg(long, requires = "weights")]
    pub zero_weights: bool,
}

/// Parses `args` (program name first), runs the subcommand, and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return EXIT_OK;
            }
            let text = e.to_string();
            eprintln!(
                "{}",
                text.lines().next().unwrap_or("error: invalid arguments")
            );
            return EXIT_VALIDATION;
        }
    };
    match cfg.command {
        Command::Selftest(a) => {
            let (table, ok) = cmd_selftest(&a);
            print!("{table}");
            if ok {
                EXIT_OK
            } else {
                EXIT_SELFTEST
            }
        }
        Command::Rectify(a) => report(cmd_rectify(&a)),
        Command::Inspect(a) => report(cmd_inspect(&a)),
        Command::Synth(a) => report(cmd_synth(&a)),
    }
}

fn report(r: Result<String>) -> i32 {
    match r {
        Ok(out) => {
            print!("{out}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_degenerate() {
        EXIT_DEGENERATE
    } else {
        EXIT_VALIDATION
    }
}

enum Source {
    Image(Tensor),
    Features(Tensor),
}

impl Source {
    fn tensor(&self) -> &Tensor {
        match self {
            Source::Image(t) | Source::Features(t) => t,
        }
    }
}

fn check_grid(requested: Option<Extent>, rows: usize, cols: usize, what: &str) -> Result<()> {
    match requested {
        Some(e) if (e.rows, e.cols) != (rows, cols) => Err(Error::Validation(format!(
            "--grid {}x{} does not match the {rows}x{cols} lattice of {what}",
            e.rows, e.cols
        ))),
        _ => Ok(()),
    }
}

/// Bilinear resize of a `1×H×W` image to the network input size.
fn network_input(image: &Tensor) -> Result<Tensor> {
    let (c, h, w) = image.chw()?;
    if c != 1 {
        return Err(Error::Validation(format!(
            "network input needs one channel, got {c}"
        )));
    }
    if (h, w) == (INPUT_H, INPUT_W) {
        return Ok(image.clone());
    }
    warp(
        image,
        &SamplingGrid::identity(INPUT_H, INPUT_W),
        BorderPolicy::Clamp,
    )
}

pub fn cmd_rectify(a: &RectifyArgs) -> Result<String> {
    let source = match (&a.image, &a.features) {
        (Some(p), None) => Source::Image(load_image(p)?),
        (None, Some(p)) => {
            let store = load_weights(p)?;
            let t = store.get(FEATURES_TENSOR).ok_or_else(|| {
                Error::Validation(format!("{}: no `{FEATURES_TENSOR}` tensor", p.display()))
            })?;
            if t.rank() != 3 {
                return Err(Error::Validation(format!(
                    "feature map must be C×H×W, got {:?}",
                    t.dims()
                )));
            }
            Source::Features(t.clone())
        }
        _ => {
            return Err(Error::Validation(
                "give exactly one of --image and --features".into(),
            ))
        }
    };
    let (_, src_h, src_w) = source.tensor().chw()?;
    let out = a.out_size.unwrap_or(match source {
        Source::Image(_) => Extent {
            rows: src_h,
            cols: src_w,
        },
        Source::Features(_) => Extent {
            rows: FEATURE_H,
            cols: FEATURE_W,
        },
    });
    let m = out.rows * out.cols;

    let (grid, attention, lambda, beta) = match (&a.points, &a.weights) {
        (Some(p), None) => {
            let doc = crate::io::import_grid_json(p)?;
            check_grid(a.grid, doc.grid.rows(), doc.grid.cols(), "the points file")?;
            let k = doc.grid.len();
            let attention = match doc.attention {
                Some(att) if att.m_locations() != m => {
                    return Err(Error::Validation(format!(
                        "points file has {} attention rows, output {}x{} needs {m}",
                        att.m_locations(),
                        out.rows,
                        out.cols
                    )))
                }
                Some(att) => att,
                None => AttentionMatrix::zeros(m, k)?,
            };
            (
                doc.grid,
                attention,
                a.lambda.unwrap_or(doc.lambda),
                a.beta.unwrap_or(doc.beta),
            )
        }
        (None, Some(p)) => {
            let Source::Image(image) = &source else {
                return Err(Error::Validation(
                    "--weights needs --image: the network reads pixels".into(),
                ));
            };
            check_grid(a.grid, ENCODED_H, ENCODED_W, "the network")?;
            let w = load_weights(p)?;
            w.validate()?;
            let fwd = rectifier_forward(&network_input(image)?, &w)?;
            let attention = if (out.rows, out.cols) == (FEATURE_H, FEATURE_W) {
                fwd.attention
            } else {
                fwd.attention
                    .resample(FEATURE_H, FEATURE_W, out.rows, out.cols)?
            };
            (
                fwd.grid,
                attention,
                a.lambda.unwrap_or(DEFAULT_LAMBDA),
                a.beta.unwrap_or(DEFAULT_BETA),
            )
        }
        _ => {
            return Err(Error::Validation(
                "give exactly one of --points and --weights".into(),
            ))
        }
    };
    if !(lambda.is_finite() && beta.is_finite()) {
        return Err(Error::Validation("lambda and beta must be finite".into()));
    }

    let transform = solve_transform(&grid)?.with_weighting(lambda, beta);
    let sampling = build_sampling_grid(&transform, &attention, out.rows, out.cols)?;
    let rectified = warp(source.tensor(), &sampling, a.border)?;
    if !rectified.all_finite() {
        return Err(Error::Degenerate("rectified output is not finite".into()));
    }

    let mut msg = String::new();
    match source {
        Source::Image(_) if rectified.dims()[0] == 1 => save_image(&rectified, &a.out)?,
        _ => {
            let mut store = WeightStore::new();
            store.insert(FEATURES_TENSOR, rectified.clone());
            save_weights(&store, &a.out)?;
        }
    }
    let _ = writeln!(msg, "wrote {} ({}x{})", a.out.display(), out.rows, out.cols);

    if a.overlay {
        let stem = a
            .out
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("rectified");
        let points_path = a.out.with_file_name(format!("{stem}_points.ppm"));
        let grid_path = a.out.with_file_name(format!("{stem}_grid.ppm"));
        save_rgb_image(
            &overlay::annotate_points(source.tensor(), &grid)?,
            &points_path,
        )?;
        let step = (out.rows.max(out.cols) / 16).max(1);
        save_rgb_image(
            &overlay::deformation_grid(source.tensor(), &sampling, step)?,
            &grid_path,
        )?;
        let _ = writeln!(msg, "wrote {}", points_path.display());
        let _ = writeln!(msg, "wrote {}", grid_path.display());
    }
    Ok(msg)
}

#[derive(Serialize)]
struct ManifestDoc {
    parameters: Vec<ParamSpec>,
    rectifier_parameters: usize,
    total_parameters: usize,
}

pub fn cmd_inspect(a: &InspectArgs) -> Result<String> {
    let mut out = String::new();
    if a.manifest {
        let parameters = manifest();
        let doc = ManifestDoc {
            total_parameters: parameters.iter().map(ParamSpec::len).sum(),
            rectifier_parameters: rectifier_parameter_count(),
            parameters,
        };
        out.push_str(&serde_json::to_string_pretty(&doc).expect("manifest serializes"));
        out.push('\n');
    }
    if let Some(path) = &a.path {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        out.push_str(&describe(path, &bytes)?);
    }
    Ok(out)
}

fn describe(path: &Path, bytes: &[u8]) -> Result<String> {
    let mut out = String::new();
    if bytes.starts_with(MAGIC) {
        let w = decode_weights(bytes)?;
        let _ = writeln!(out, "{}: TPSW weights, {} tensors", path.display(), w.len());
        for (name, t) in w.iter() {
            let dims: Vec<String> = t.dims().iter().map(usize::to_string).collect();
            let _ = writeln!(out, "  {name:<24} {:<16} {}", dims.join("x"), t.len());
        }
        let _ = writeln!(out, "total parameters: {}", w.parameter_count());
        let missing: Vec<String> = manifest()
            .into_iter()
            .filter(|p| {
                w.get(&p.name)
                    .map(|t| t.dims() != p.dims.as_slice())
                    .unwrap_or(true)
            })
            .map(|p| p.name)
            .collect();
        if missing.is_empty() {
            let _ = writeln!(out, "complete network weights");
        } else if missing.len() < manifest().len() {
            let _ = writeln!(out, "missing or misshapen: {}", missing.join(", "));
        }
    } else if bytes.first() == Some(&b'P') {
        let t = decode_netpbm(bytes)?;
        let (_, h, w) = t.chw()?;
        let mean = t.data().iter().map(|&v| v as f64).sum::<f64>() / t.len() as f64;
        let _ = writeln!(
            out,
            "{}: image {h}x{w}, mean intensity {mean:.4}",
            path.display()
        );
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| Error::Format("unrecognized file type".into()))?;
        let doc = grid_from_json(text)?;
        let g = &doc.grid;
        let max_offset = g
            .offsets()
            .iter()
            .fold(0.0f64, |m, o| m.max(o.x.abs()).max(o.y.abs()));
        let _ = writeln!(
            out,
            "{}: control grid {}x{} ({} points), max |offset| {max_offset:.4}, lambda {}, beta {}",
            path.display(),
            g.rows(),
            g.cols(),
            g.len(),
            doc.lambda,
            doc.beta
        );
        match &doc.attention {
            Some(att) => {
                let _ = writeln!(
                    out,
                    "attention {}x{}, max |a| {:.4}",
                    att.m_locations(),
                    att.k_points(),
                    att.max_abs()
                );
            }
            None => {
                let _ = writeln!(out, "no attention");
            }
        }
    }
    Ok(out)
}

/// Runs the requested suites (all when none are named) and renders the
/// table. The flag is true when every suite passed.
pub fn cmd_selftest(a: &SelftestArgs) -> (String, bool) {
    let tester = SelfTest::new(a.seed);
    let run = || -> Vec<SuiteReport> {
        if a.suites.is_empty() {
            tester.run_all()
        } else {
            a.suites
                .iter()
                .map(|n| {
                    tester.run(n).unwrap_or_else(|| SuiteReport {
                        name: "unknown",
                        passed: false,
                        detail: format!("no suite named `{n}`"),
                        elapsed: Default::default(),
                    })
                })
                .collect()
        }
    };
    let reports = if a.threads > 0 {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(a.threads)
            .build()
        {
            Ok(pool) => pool.install(run),
            Err(e) => return (format!("error: thread pool: {e}\n"), false),
        }
    } else {
        run()
    };
    render_table(&reports)
}

pub fn render_table(reports: &[SuiteReport]) -> (String, bool) {
    let mut out = String::new();
    let mut total = std::time::Duration::ZERO;
    for r in reports {
        total += r.elapsed;
        let _ = writeln!(
            out,
            "{:<4} {:<24} {:>8.3}s  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.elapsed.as_secs_f64(),
            r.detail
        );
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    let _ = writeln!(
        out,
        "{} suites, {failed} failed, {:.3}s",
        reports.len(),
        total.as_secs_f64()
    );
    (out, failed == 0 && !reports.is_empty())
}

pub fn cmd_synth(a: &SynthArgs) -> Result<String> {
    if !(a.amplitude.is_finite() && a.periods.is_finite() && a.noise.is_finite() && a.noise >= 0.0)
    {
        return Err(Error::Validation(
            "amplitude, periods and noise must be finite, noise non-negative".into(),
        ));
    }
    let params = StripeParams {
        amplitude: a.amplitude,
        periods: a.periods,
        noise: a.noise,
        ..StripeParams::default()
    };
    let mut msg = String::new();
    save_image(&stripe_image(&params, a.seed), &a.out)?;
    let _ = writeln!(
        msg,
        "wrote {} ({}x{})",
        a.out.display(),
        params.height,
        params.width
    );
    if let Some(p) = &a.points {
        let base = make_grid(DEFAULT_ROWS, DEFAULT_COLS)?;
        let offsets = params.counter_offsets(&base);
        export_grid_json(&GridDocument::new(base.with_offsets(offsets)?), p)?;
        let _ = writeln!(msg, "wrote {}", p.display());
    }
    if let Some(p) = &a.weights {
        let w = if a.zero_weights {
            WeightStore::zeros()
        } else {
            WeightStore::seeded(a.seed)
        };
        save_weights(&w, p)?;
        let _ = writeln!(
            msg,
            "wrote {} ({} parameters)",
            p.display(),
            w.parameter_count()
        );
    }
    Ok(msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extent_parsing() {
        assert_eq!(
            "4x16".parse::<Extent>().unwrap(),
            Extent { rows: 4, cols: 16 }
        );
        assert_eq!(
            "32×128".parse::<Extent>().unwrap(),
            Extent {
                rows: 32,
                cols: 128
            }
        );
        assert!("4".parse::<Extent>().is_err());
        assert!("0x3".parse::<Extent>().is_err());
        assert!("ax3".parse::<Extent>().is_err());
    }

    #[test]
    fn points_and_weights_are_exclusive() {
        let base = ["tpspp", "rectify", "--image", "a.pgm", "--out", "b.pgm"];
        assert_eq!(run(base), EXIT_VALIDATION);
        let both = [&base[..], &["--points", "p.json", "--weights", "w.bin"]].concat();
        assert_eq!(run(both), EXIT_VALIDATION);
    }

    #[test]
    fn degenerate_errors_map_to_three() {
        assert_eq!(exit_code(&Error::Degenerate("x".into())), EXIT_DEGENERATE);
        assert_eq!(exit_code(&Error::Format("x".into())), EXIT_VALIDATION);
    }

    #[test]
    fn manifest_lists_every_parameter() {
        let text = cmd_inspect(&InspectArgs {
            path: None,
            manifest: true,
        })
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["parameters"].as_array().unwrap().len(), manifest().len());
        assert_eq!(v["rectifier_parameters"], rectifier_parameter_count());
    }
}
