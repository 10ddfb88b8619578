//! Command-line front end. `run_cli` returns the process exit code: 0 on
//! success, 1 on data or I/O errors, 2 on usage errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::csc::ConvDictionary;
use crate::cube::{Region, SpectralCube};
use crate::error::{Error, Result};
use crate::forward::{add_noise, build_system, forward, generate_mask};
use crate::io::{self, OutputDir};
use crate::metrics::{write_metrics_csv, MetricsReport};
use crate::params::SolverParams;
use crate::pipeline::{compare_methods, reconstruct, write_compare_csv, Acquisition, Method, Scene};
use crate::synthetic::textured_scene;

#[derive(Parser, Debug)]
#[command(name = "specrec", version, about = "Spectral snapshot reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random binary coded aperture.
    MaskGen(MaskGenArgs),
    /// Simulate a coded snapshot of a cube.
    Simulate(SimulateArgs),
    /// Reconstruct a cube from a snapshot.
    Reconstruct(ReconstructArgs),
    /// Score a reconstruction against ground truth.
    Metrics(MetricsArgs),
    /// Run several methods on several scenes and tabulate the scores.
    Compare(CompareArgs),
    /// Render a cube, band or composite to PNG.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Directory receiving every file the command writes.
    #[arg(long)]
    out_dir: PathBuf,
}

/// Solver settings that may come from a JSON config and be overridden by
/// flags.
#[derive(Args, Debug, Default)]
struct ParamArgs {
    /// JSON file with solver parameters and run settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    inner_iters: Option<usize>,
    #[arg(long)]
    tv_iters: Option<usize>,
    #[arg(long)]
    lowpass_weight: Option<f64>,
    #[arg(long)]
    gram_epsilon: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct MaskGenArgs {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of open pixels.
    #[arg(long)]
    density: Option<f64>,
    /// Store the full sheared system for this many bands instead of the
    /// base mask.
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    shear_step: Option<i64>,
    #[arg(long, default_value = "mask.srec")]
    name: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct CubeSource {
    /// Cube container.
    #[arg(long, conflicts_with = "cube_dir")]
    cube: Option<PathBuf>,
    /// Directory of 16-bit grayscale PNG bands.
    #[arg(long)]
    cube_dir: Option<PathBuf>,
    /// Band order for --cube-dir, one file name per line.
    #[arg(long, requires = "cube_dir")]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: CubeSource,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    shear_step: Option<i64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long, default_value = "measurement.srec")]
    name: String,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    measurement: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// gaptv, csc-notv or csc-tv.
    #[arg(long)]
    method: Option<String>,
    /// Band count when the mask file holds a base mask.
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    shear_step: Option<i64>,
    /// Optional reference cube; adds PSNR and SSIM columns to the trace.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    #[arg(long, default_value = "reconstruction.srec")]
    name: String,
    #[arg(long, default_value = "trace.csv")]
    trace_name: String,
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    /// JSON file holding a list of regions `{"x0":..,"y0":..,"w":..,"h":..}`; each adds a
    /// row whose SAM is restricted to that region.
    #[arg(long)]
    regions: Option<PathBuf>,
    #[arg(long, default_value = "metrics.csv")]
    name: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// JSON file listing scenes, methods, acquisition, dictionary, params.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's dictionary.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Fill the seconds column with wall times.
    #[arg(long)]
    timing: bool,
    /// Skip writing the cube container and trace of each run.
    #[arg(long)]
    no_cubes: bool,
    #[arg(long, default_value = "compare.csv")]
    name: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long, conflicts_with = "image")]
    cube: Option<PathBuf>,
    /// Image container, e.g. a measurement.
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long, conflicts_with = "rgb")]
    band: Option<usize>,
    /// Three band indices for red, green and blue, e.g. `6,3,0`.
    #[arg(long, value_parser = parse_rgb)]
    rgb: Option<[usize; 3]>,
    /// Output name; defaults depend on what is exported.
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_rgb(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<usize>| format!("expected three band indices, got {}", v.len()))
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::MaskGen(a) => mask_gen(a),
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Export(a) => export_cmd(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            1
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Prefixes an error with the flag whose input caused it.
fn with_flag<T>(flag: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Data(format!("{flag}: {e}")))
}

fn required<T>(value: Option<T>, flag: &str, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::Parameter(format!("{what} requires {flag} (or the matching config key)")))
}

/// Run settings shared by mask-gen, simulate and reconstruct. Every solver
/// parameter may also appear at the top level.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSettings {
    cube: Option<PathBuf>,
    mask: Option<PathBuf>,
    dictionary: Option<PathBuf>,
    measurement: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    density: Option<f64>,
    shear_step: Option<i64>,
    method: Option<String>,
    width: Option<usize>,
    height: Option<usize>,
    bands: Option<usize>,
    noise_seed: Option<u64>,
}

const PARAM_KEYS: [&str; 9] = [
    "beta",
    "rho",
    "kappa",
    "outer_iters",
    "inner_iters",
    "tv_iters",
    "lowpass_weight",
    "gram_epsilon",
    "noise_sigma",
];

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: invalid JSON: {e}", path.display())))
}

/// Splits a flat config object into run settings and solver parameters.
/// Relative paths are resolved against the config file's directory.
fn load_config(path: &Path) -> Result<(RunSettings, SolverParams)> {
    let bad = |e: serde_json::Error| Error::Data(format!("--config {}: {e}", path.display()));
    let Value::Object(all) = read_json(path)? else {
        return Err(Error::Data(format!("--config {}: expected a JSON object", path.display())));
    };
    let (params, rest): (Map<String, Value>, Map<String, Value>) =
        all.into_iter().partition(|(k, _)| PARAM_KEYS.contains(&k.as_str()));
    let params: SolverParams = serde_json::from_value(Value::Object(params)).map_err(bad)?;
    let mut settings: RunSettings = serde_json::from_value(Value::Object(rest)).map_err(bad)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [
        &mut settings.cube,
        &mut settings.mask,
        &mut settings.dictionary,
        &mut settings.measurement,
        &mut settings.out_dir,
    ]
    .into_iter()
    .flatten()
    {
        *p = base.join(&*p);
    }
    Ok((settings, params))
}

fn settings_and_params(args: &ParamArgs) -> Result<(RunSettings, SolverParams)> {
    let (settings, mut p) = match &args.config {
        Some(path) => load_config(path)?,
        None => Default::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { p.$field = v; })*
        };
    }
    set!(beta, rho, kappa, outer_iters, inner_iters, tv_iters, lowpass_weight, gram_epsilon, noise_sigma);
    p.validate()?;
    Ok((settings, p))
}

fn create_out(out: &OutArgs) -> Result<OutputDir> {
    OutputDir::create(&out.out_dir)
}

fn load_source(source: &CubeSource, fallback: Option<PathBuf>) -> Result<SpectralCube> {
    match (&source.cube, &source.cube_dir) {
        (Some(p), _) => with_flag("--cube", io::load_cube(p)),
        (None, Some(dir)) => match &source.manifest {
            Some(m) => with_flag("--cube-dir", io::load_cube_dir_with_manifest(dir, m)),
            None => with_flag("--cube-dir", io::load_cube_dir(dir)),
        },
        (None, None) => {
            let p = required(fallback, "--cube or --cube-dir", "simulate")?;
            with_flag("--cube", io::load_cube(p))
        }
    }
}

fn mask_gen(a: MaskGenArgs) -> Result<()> {
    let settings = match &a.config {
        Some(path) => load_config(path)?.0,
        None => RunSettings::default(),
    };
    let width = required(a.width.or(settings.width), "--width", "mask-gen")?;
    let height = required(a.height.or(settings.height), "--height", "mask-gen")?;
    let seed = a.seed.or(settings.seed).unwrap_or(1);
    let density = a.density.or(settings.density).unwrap_or(0.5);
    let mask = generate_mask(width, height, seed, density)?;
    let out = create_out(&a.out)?;
    let path = out.file(&a.name)?;
    match a.bands.or(settings.bands) {
        Some(bands) if bands > 1 => {
            let shear = a.shear_step.or(settings.shear_step).unwrap_or(1);
            io::save_system(&build_system(&mask, bands, shear)?, &path)?;
        }
        _ => io::save_mask(&mask, &path)?,
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let (settings, params) = settings_and_params(&a.params)?;
    let cube = load_source(&a.source, settings.cube.clone())?;
    let mask_path = required(a.mask.or(settings.mask), "--mask", "simulate")?;
    let shear = a.shear_step.or(settings.shear_step).unwrap_or(1);
    let system = with_flag("--mask", io::load_mask(&mask_path).and_then(|m| m.into_system(cube.bands(), shear)))?;
    let y = forward(&system, &cube)?;
    let seed = a.noise_seed.or(settings.noise_seed).unwrap_or(2);
    let y = add_noise(&y, params.noise_sigma, seed)?;
    let out = create_out(&a.out)?;
    let path = out.file(&a.name)?;
    io::save_image(&y, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn reconstruct_cmd(a: ReconstructArgs) -> Result<()> {
    let (settings, params) = settings_and_params(&a.params)?;
    let method_name = a.method.or(settings.method).unwrap_or_else(|| "gaptv".into());
    let method: Method = method_name.parse()?;
    let dict_path = a.dictionary.or(settings.dictionary);
    let dict = match (method.needs_dictionary(), dict_path) {
        (true, None) => {
            return Err(Error::Parameter(format!(
                "method {method} needs a dictionary: pass --dictionary <PATH>"
            )))
        }
        (true, Some(p)) => Some(with_flag("--dictionary", io::load_dictionary(&p))?),
        (false, _) => None,
    };
    let y_path = required(a.measurement.or(settings.measurement), "--measurement", "reconstruct")?;
    let y = with_flag("--measurement", io::load_image(&y_path))?;
    let mask_path = required(a.mask.or(settings.mask), "--mask", "reconstruct")?;
    let mask = with_flag("--mask", io::load_mask(&mask_path))?;
    let bands = match (&mask, a.bands.or(settings.bands)) {
        (io::MaskFile::System(s), b) => b.unwrap_or(s.bands()),
        (io::MaskFile::Base(_), Some(b)) => b,
        (io::MaskFile::Base(_), None) => {
            return Err(Error::Parameter("a base mask needs --bands".into()))
        }
    };
    let shear = a.shear_step.or(settings.shear_step).unwrap_or(1);
    let system = with_flag("--mask", mask.into_system(bands, shear))?;
    let truth = match &a.ground_truth {
        Some(p) => Some(with_flag("--ground-truth", io::load_cube(p))?),
        None => None,
    };
    let (estimate, trace) = reconstruct(&system, &y, dict.as_ref(), &params, method, truth.as_ref())?;
    let out = create_out(&a.out)?;
    let cube_path = out.file(&a.name)?;
    io::save_cube(&estimate, &cube_path)?;
    let trace_path = out.file(&a.trace_name)?;
    write_csv_file(&trace_path, |w| trace.write_csv(w))?;
    println!("wrote {} and {}", cube_path.display(), trace_path.display());
    Ok(())
}

fn write_csv_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| std::io::Write::flush(&mut w)).map_err(|e| Error::io(path, e))
}

fn metrics_cmd(a: MetricsArgs) -> Result<()> {
    let truth = with_flag("--truth", io::load_cube(&a.truth))?;
    let estimate = with_flag("--estimate", io::load_cube(&a.estimate))?;
    let regions: Vec<Region> = match &a.regions {
        Some(p) => serde_json::from_value(read_json(p)?)
            .map_err(|e| Error::Data(format!("--regions {}: {e}", p.display())))?,
        None => Vec::new(),
    };
    let full = Region::full(truth.width(), truth.height());
    let mut rows = vec![("full".to_string(), MetricsReport::compute(&truth, &estimate, &full)?)];
    for (i, r) in regions.iter().enumerate() {
        rows.push((format!("region{i}"), MetricsReport::compute(&truth, &estimate, r)?));
    }
    let out = create_out(&a.out)?;
    let path = out.file(&a.name)?;
    write_csv_file(&path, |w| write_metrics_csv(w, &rows))?;
    write_metrics_csv(std::io::stdout().lock(), &rows).map_err(|e| Error::io("<stdout>", e))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareConfig {
    scenes: Vec<SceneConfig>,
    #[serde(default = "all_methods")]
    methods: Vec<String>,
    #[serde(default)]
    acquisition: AcquisitionConfig,
    dictionary: Option<PathBuf>,
    #[serde(default)]
    params: SolverParams,
}

fn all_methods() -> Vec<String> {
    Method::ALL.iter().map(|m| m.to_string()).collect()
}

/// A scene is a cube container, a PNG directory, or the built-in synthetic
/// scene with `[width, height, bands]`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneConfig {
    name: String,
    cube: Option<PathBuf>,
    cube_dir: Option<PathBuf>,
    manifest: Option<PathBuf>,
    synthetic: Option<[usize; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AcquisitionConfig {
    mask_seed: u64,
    density: f64,
    shear_step: i64,
    noise_sigma: f64,
    noise_seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        let a = Acquisition::default();
        Self {
            mask_seed: a.mask_seed,
            density: a.density,
            shear_step: a.shear_step,
            noise_sigma: a.noise_sigma,
            noise_seed: a.noise_seed,
        }
    }
}

fn load_scene(s: &SceneConfig, base: &Path) -> Result<Scene> {
    let truth = match (&s.cube, &s.cube_dir, s.synthetic) {
        (Some(p), None, None) => io::load_cube(base.join(p))?,
        (None, Some(d), None) => match &s.manifest {
            Some(m) => io::load_cube_dir_with_manifest(base.join(d), base.join(m))?,
            None => io::load_cube_dir(base.join(d))?,
        },
        (None, None, Some([w, h, l])) => textured_scene(w, h, l),
        _ => {
            return Err(Error::Data(format!(
                "scene {:?} needs exactly one of cube, cube_dir, synthetic",
                s.name
            )))
        }
    };
    Ok(Scene {
        name: s.name.clone(),
        truth,
    })
}

fn plain_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !name.starts_with('.')
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    let cfg: CompareConfig = serde_json::from_value(read_json(&a.config)?)
        .map_err(|e| Error::Data(format!("--config {}: {e}", a.config.display())))?;
    cfg.params.validate()?;
    let base = a.config.parent().unwrap_or(Path::new(""));
    let methods = cfg
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>>>()?;
    let dict_path = a.dictionary.or_else(|| cfg.dictionary.as_ref().map(|p| base.join(p)));
    let dict: Option<ConvDictionary> = match dict_path {
        Some(p) => Some(with_flag("--dictionary", io::load_dictionary(&p))?),
        None if methods.iter().any(|m| m.needs_dictionary()) => {
            return Err(Error::Parameter(
                "sparse-coding methods need a dictionary: pass --dictionary <PATH> or set it in the config".into(),
            ))
        }
        None => None,
    };
    let mut scenes = Vec::with_capacity(cfg.scenes.len());
    for s in &cfg.scenes {
        if !plain_name(&s.name) {
            return Err(Error::Data(format!(
                "scene name {:?} may only use letters, digits, '-', '_' and '.'",
                s.name
            )));
        }
        scenes.push(load_scene(s, base)?);
    }
    let acq = &cfg.acquisition;
    let acquisition = Acquisition {
        mask_seed: acq.mask_seed,
        density: acq.density,
        shear_step: acq.shear_step,
        noise_sigma: acq.noise_sigma,
        noise_seed: acq.noise_seed,
    };
    let runs = compare_methods(&scenes, &methods, &acquisition, dict.as_ref(), &cfg.params, a.timing)?;
    let out = create_out(&a.out)?;
    let path = out.file(&a.name)?;
    write_csv_file(&path, |w| write_compare_csv(w, runs.iter().map(|r| &r.row)))?;
    if !a.no_cubes {
        for r in &runs {
            let stem = format!("{}_{}", r.row.scene, r.row.method);
            io::save_cube(&r.estimate, out.file(&format!("{stem}.srec"))?)?;
            let trace_path = out.file(&format!("{stem}_trace.csv"))?;
            write_csv_file(&trace_path, |w| r.trace.write_csv_with(w, a.timing))?;
        }
    }
    write_compare_csv(std::io::stdout().lock(), runs.iter().map(|r| &r.row))
        .map_err(|e| Error::io("<stdout>", e))?;
    Ok(())
}

fn export_cmd(a: ExportArgs) -> Result<()> {
    let out = create_out(&a.out)?;
    if let Some(p) = &a.image {
        let img = with_flag("--image", io::load_image(p))?;
        let path = out.file(a.name.as_deref().unwrap_or("image.png"))?;
        io::export_png(&img, &path)?;
        println!("wrote {}", path.display());
        return Ok(());
    }
    let cube_path = required(a.cube.as_ref(), "--cube or --image", "export")?;
    let cube = with_flag("--cube", io::load_cube(cube_path))?;
    if let Some(rgb) = &a.rgb {
        let path = out.file(a.name.as_deref().unwrap_or("rgb.png"))?;
        io::export_rgb(&cube, *rgb, &path)?;
        println!("wrote {}", path.display());
    } else if let Some(b) = a.band {
        let default = format!("band_{b:03}.png");
        let path = out.file(a.name.as_deref().unwrap_or(&default))?;
        io::export_band(&cube, b, &path)?;
        println!("wrote {}", path.display());
    } else {
        let prefix = a.name.as_deref().unwrap_or("band");
        for b in 0..cube.bands() {
            io::export_band(&cube, b, out.file(&format!("{prefix}_{b:03}.png"))?)?;
        }
        println!("wrote {} bands to {}", cube.bands(), out.root().display());
    }
    Ok(())
}
