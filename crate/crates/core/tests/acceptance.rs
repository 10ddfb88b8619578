//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed. The process
//! exits nonzero when a criterion fails and `SPECREC_STRICT_ACCEPTANCE=1`
//! is set; otherwise failures are reported and summarized but do not fail
//! the run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use specrec::csc::{dict_fft, group_shrink, reconstruct_from_coeffs, solve_rank1_system, CoeffStack, ConvDictionary};
use specrec::forward::{adjoint, build_system, forward, generate_mask, gram_diagonal, BoxMuller, SystemMasks};
use specrec::gap::gap_projection_step;
use specrec::io;
use specrec::metrics::{psnr, spectral_angle, ssim};
use specrec::pipeline::{reconstruct, Method};
use specrec::synthetic::textured_scene;
use specrec::tv::{tv_chambolle, tv_objective};
use specrec::{Image2D, SolverParams, SpectralCube};

// pinned tolerances
const ADJOINT_TOL: f64 = 1e-10;
const PROJECTION_TOL: f64 = 1e-10;
const RANK1_TOL: f64 = 1e-8;
const PROX_TOL: f64 = 1e-12;
const CONV_TOL: f64 = 1e-10;
const MEAN_TOL: f64 = 1e-8;
const RECOVERY_DB: f64 = 60.0;
const ORDER_MARGIN_DB: f64 = 0.2;
const PSNR_DIFF_TOL: f64 = 1e-9;
const SAM_TOL: f64 = 1e-12;
const SSIM_CONST_TOL: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_cube(r: &mut ChaCha8Rng, w: usize, h: usize, l: usize) -> SpectralCube {
    SpectralCube::new(w, h, l, (0..w * h * l).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_system(r: &mut ChaCha8Rng, w: usize, h: usize, l: usize) -> SystemMasks {
    SystemMasks::new(w, h, l, (0..w * h * l).map(|_| r.gen::<f64>()).collect()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn c1_adjoint() -> Outcome {
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let system = random_system(&mut r, 16, 16, 4);
        let c = random_cube(&mut r, 16, 16, 4);
        let y = Image2D::new(16, 16, (0..256).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
        let lhs = dot(forward(&system, &c).unwrap().data(), y.data());
        let rhs = dot(c.data(), adjoint(&system, &y).unwrap().data());
        worst = worst.max((lhs - rhs).abs() / (norm(c.data()) * norm(y.data())));
    }
    outcome(worst <= ADJOINT_TOL, format!("worst relative gap {worst:.2e} (tol {ADJOINT_TOL:.0e})"))
}

fn c2_projection() -> Outcome {
    let mut r = rng(202);
    let eps = SolverParams::default().gram_epsilon;
    let mut worst = 0.0f64;
    let mut skipped = 0;
    for i in 0..10 {
        let mask = generate_mask(16, 16, 300 + i, 0.5).unwrap();
        let system = build_system(&mask, 4, 1).unwrap();
        let truth = random_cube(&mut r, 16, 16, 4);
        let y = forward(&system, &truth).unwrap();
        let estimate = random_cube(&mut r, 16, 16, 4);
        let v = gap_projection_step(&system, &estimate, &y, eps).unwrap();
        let hv = forward(&system, &v).unwrap();
        let gram = gram_diagonal(&system);
        let y_inf = y.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for p in 0..256 {
            if gram.data()[p] >= eps {
                worst = worst.max((hv.data()[p] - y.data()[p]).abs() / y_inf);
            } else {
                skipped += 1;
            }
        }
    }
    outcome(
        worst <= PROJECTION_TOL,
        format!("worst max|Hv - y| / ||y||inf = {worst:.2e} (tol {PROJECTION_TOL:.0e}); {skipped} zero-coverage pixels excluded"),
    )
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![Complex64::default(); n];
    for row in (0..n).rev() {
        let s: Complex64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn c3_rank1() -> Outcome {
    let mut r = rng(303);
    let mut worst = 0.0f64;
    let c = |r: &mut ChaCha8Rng| Complex64::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
    for i in 0..100 {
        let m = [1, 2, 4, 8][i % 4];
        let d: Vec<Complex64> = (0..m).map(|_| c(&mut r)).collect();
        let b: Vec<Complex64> = (0..m).map(|_| c(&mut r)).collect();
        let rho = r.gen_range(0.05..5.0);
        let a: Vec<Vec<Complex64>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| d[i].conj() * d[j] + if i == j { Complex64::new(rho, 0.0) } else { Complex64::default() })
                    .collect()
            })
            .collect();
        let dense = dense_solve(a, b.clone());
        let fast = solve_rank1_system(&d, &b, rho).unwrap();
        let err: f64 = dense.iter().zip(&fast).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = dense.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(err / scale);
    }
    outcome(worst <= RANK1_TOL, format!("worst relative error {worst:.2e} (tol {RANK1_TOL:.0e})"))
}

fn c4_prox() -> Outcome {
    let mut r = rng(404);
    let bands = 6;
    let count = 1000;
    // fibers run across bands; every 4th fiber is scaled into the dead zone
    let kappa = 0.7;
    let mut data = vec![0.0; bands * count];
    for p in 0..count {
        let scale = if p % 4 == 0 { 0.1 } else { 1.0 };
        for l in 0..bands {
            data[l * count + p] = scale * r.gen_range(-1.0..1.0);
        }
    }
    let stack = CoeffStack::from_vec(bands, 1, count, 1, data).unwrap();
    let shrunk = group_shrink(&stack, kappa).unwrap();
    let mut worst = 0.0f64;
    let mut dead = 0;
    for p in 0..count {
        let g = stack.fiber(0, p);
        let n = norm(&g);
        let factor = if n <= kappa { 0.0 } else { 1.0 - kappa / n };
        if factor == 0.0 {
            dead += 1;
        }
        for (a, b) in shrunk.fiber(0, p).iter().zip(&g) {
            worst = worst.max((a - factor * b).abs());
        }
    }
    let mut expansive = 0;
    for _ in 0..count {
        let kappa = r.gen_range(0.0..2.0);
        let a: Vec<f64> = (0..bands).map(|_| r.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..bands).map(|_| r.gen_range(-2.0..2.0)).collect();
        let sa = group_shrink(&CoeffStack::from_vec(bands, 1, 1, 1, a.clone()).unwrap(), kappa).unwrap();
        let sb = group_shrink(&CoeffStack::from_vec(bands, 1, 1, 1, b.clone()).unwrap(), kappa).unwrap();
        let lhs = sa.distance(&sb).unwrap();
        let rhs = norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
        if lhs > rhs + 1e-15 {
            expansive += 1;
        }
    }
    outcome(
        worst <= PROX_TOL && dead > 0 && expansive == 0,
        format!("worst deviation {worst:.2e} (tol {PROX_TOL:.0e}), {dead} dead-zone fibers, {expansive}/1000 expansive pairs"),
    )
}

fn c5_convolution() -> Outcome {
    let mut r = rng(505);
    let (w, h, k, m) = (16, 16, 3, 4);
    let dict = ConvDictionary::new(k, m, (0..k * k * m).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
    let spec = dict_fft(&dict, w, h).unwrap();
    let coeffs: Vec<f64> = (0..m * w * h).map(|_| r.gen_range(-1.0..1.0)).collect();
    let fast = reconstruct_from_coeffs(&spec, &coeffs).unwrap();
    let mut worst = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for mi in 0..m {
                let kernel = dict.kernel(mi);
                for j in 0..k {
                    for i in 0..k {
                        let sx = (x + w - i) % w;
                        let sy = (y + h - j) % h;
                        acc += kernel[j * k + i] * coeffs[mi * w * h + sy * w + sx];
                    }
                }
            }
            worst = worst.max((acc - fast.get(x, y)).abs());
        }
    }
    outcome(worst <= CONV_TOL, format!("max error {worst:.2e} (tol {CONV_TOL:.0e})"))
}

fn c6_tv() -> Outcome {
    let (weight, iters) = (0.1, 50);
    let mut failures = 0;
    let mut worst_mean = 0.0f64;
    let mut min_drop = f64::INFINITY;
    for seed in 0..10 {
        let mut noise = BoxMuller::new(600 + seed);
        let f = Image2D::from_fn(32, 32, |x, _| if x < 16 { 0.2 } else { 0.8 } + 0.1 * noise.next());
        let u = tv_chambolle(&f, weight, iters).unwrap();
        let before = tv_objective(&f, &f, weight).unwrap();
        let after = tv_objective(&u, &f, weight).unwrap();
        min_drop = min_drop.min(before - after);
        if after >= before {
            failures += 1;
        }
        worst_mean = worst_mean.max((u.mean() - f.mean()).abs());
    }
    outcome(
        failures == 0 && worst_mean <= MEAN_TOL,
        format!("{failures}/10 without strict decrease (smallest drop {min_drop:.3e}); worst mean shift {worst_mean:.1e} (tol {MEAN_TOL:.0e})"),
    )
}

fn c7_trivial() -> Outcome {
    let ones = Image2D::filled(32, 32, 1.0);
    let system = build_system(&ones, 1, 1).unwrap();
    let dict = ConvDictionary::dct(4);
    let mut lines = Vec::new();
    let mut pass = true;
    // regularizers switched off: the pipeline itself must invert H = I;
    // default regularizers: a flat scene is a fixed point of every prior
    let unregularized = SolverParams {
        beta: 0.0,
        kappa: 0.0,
        outer_iters: 2,
        ..SolverParams::default()
    };
    let defaults = SolverParams {
        outer_iters: 2,
        ..SolverParams::default()
    };
    let textured = textured_scene(32, 32, 1);
    let flat = SpectralCube::new(32, 32, 1, vec![0.6; 32 * 32]).unwrap();
    for (label, truth, params) in [("textured/unregularized", &textured, &unregularized), ("flat/defaults", &flat, &defaults)] {
        let y = forward(&system, truth).unwrap();
        for method in Method::ALL {
            let (est, trace) = reconstruct(&system, &y, Some(&dict), params, method, None).unwrap();
            let p = psnr(truth, &est, 1.0).unwrap();
            pass &= p >= RECOVERY_DB && trace.len() <= 2;
            lines.push(format!("{label} {method} {p:.1} dB"));
        }
    }
    outcome(pass, format!("{} (need >= {RECOVERY_DB} dB in 2 outer iterations)", lines.join(", ")))
}

struct CompareOutput {
    dir: PathBuf,
    elapsed: Duration,
    ok: bool,
    stderr: String,
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn run_compare(out: &Path) -> CompareOutput {
    let start = Instant::now();
    let result = Command::new(env!("CARGO_BIN_EXE_specrec"))
        .arg("compare")
        .arg("--config")
        .arg(fixtures().join("compare64.json"))
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("specrec binary runs");
    CompareOutput {
        dir: out.to_path_buf(),
        elapsed: start.elapsed(),
        ok: result.status.success(),
        stderr: String::from_utf8_lossy(&result.stderr).into_owned(),
    }
}

fn compare_psnr(dir: &Path) -> BTreeMap<String, f64> {
    let text = fs::read_to_string(dir.join("compare.csv")).unwrap_or_default();
    text.lines()
        .skip(1)
        .filter_map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            Some((cells.get(1)?.to_string(), cells.get(2)?.parse().ok()?))
        })
        .collect()
}

fn c8_ordering(run: &CompareOutput) -> Outcome {
    if !run.ok {
        return outcome(false, format!("compare failed: {}", run.stderr.trim()));
    }
    let p = compare_psnr(&run.dir);
    let (Some(&gap), Some(&notv), Some(&tv)) = (p.get("gaptv"), p.get("csc-notv"), p.get("csc-tv")) else {
        return outcome(false, "compare.csv lacks a method row");
    };
    let secs = run.elapsed.as_secs_f64();
    let over_gap = tv - gap;
    let over_notv = tv - notv;
    let pass = over_gap >= ORDER_MARGIN_DB && over_notv >= ORDER_MARGIN_DB && secs < 120.0;
    outcome(
        pass,
        format!(
            "PSNR gaptv {gap:.3}, csc-notv {notv:.3}, csc-tv {tv:.3} dB; csc-tv - gaptv = {over_gap:+.3} dB, csc-tv - csc-notv = {over_notv:+.3} dB (need >= {ORDER_MARGIN_DB}); {secs:.1} s (limit 120 s)"
        ),
    )
}

fn c9_residuals(run: &CompareOutput) -> Outcome {
    let mut checked = 0;
    let mut bad = 0;
    for method in ["csc-notv", "csc-tv"] {
        let path = run.dir.join(format!("textured64_{method}_trace.csv"));
        let Ok(text) = fs::read_to_string(&path) else {
            return outcome(false, format!("missing {}", path.display()));
        };
        let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').collect();
        let col = |name: &str| header.iter().position(|h| *h == name);
        let (Some(first), Some(last)) = (col("primal_first"), col("primal_last")) else {
            return outcome(false, "trace lacks residual columns");
        };
        for line in text.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            let a: f64 = cells[first].parse().unwrap_or(f64::NAN);
            let b: f64 = cells[last].parse().unwrap_or(f64::NAN);
            checked += 1;
            if !(b <= a) {
                bad += 1;
            }
        }
    }
    outcome(
        checked > 0 && bad == 0,
        format!("{bad} of {checked} sparse-coding calls ended above their first residual"),
    )
}

fn c10_metrics() -> Outcome {
    let cube = textured_scene(16, 16, 3);
    let shifted = SpectralCube::new(16, 16, 3, cube.data().iter().map(|v| v + 0.1).collect()).unwrap();
    let same = psnr(&cube, &cube, 1.0).unwrap();
    let diff = psnr(&cube, &shifted, 1.0).unwrap();
    let band = cube.extract_band(1).unwrap();
    let self_ssim = ssim(&band, &band).unwrap();
    let a = [0.3, 0.5, 0.9, 0.1];
    let b = [0.2, 0.7, 0.4, 0.6];
    let b2: Vec<f64> = b.iter().map(|v| 2.0 * v).collect();
    let sam_gap = (spectral_angle(&a, &b).unwrap() - spectral_angle(&a, &b2).unwrap()).abs();
    let const_ssim = ssim(&Image2D::filled(12, 12, 0.2), &Image2D::filled(12, 12, 0.8)).unwrap();
    let pass = same == 99.0
        && (diff - 20.0).abs() <= PSNR_DIFF_TOL
        && self_ssim == 1.0
        && sam_gap <= SAM_TOL
        && (const_ssim - 0.4707).abs() <= SSIM_CONST_TOL;
    outcome(
        pass,
        format!(
            "psnr(a,a) {same}, uniform 0.1 -> {diff:.12} dB, ssim(a,a) {self_ssim}, |sam(a,2b) - sam(a,b)| {sam_gap:.1e}, constant ssim {const_ssim:.5}"
        ),
    )
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .map(|entries| {
            entries
                .flatten()
                .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap_or_default()))
                .collect()
        })
        .unwrap_or_default()
}

fn c11_determinism(a: &CompareOutput, b: &CompareOutput) -> Outcome {
    if !(a.ok && b.ok) {
        return outcome(false, "a compare run failed");
    }
    let (x, y) = (dir_contents(&a.dir), dir_contents(&b.dir));
    let cubes = x.keys().filter(|k| k.ends_with(".srec")).count();
    let same = x == y && x.contains_key("compare.csv") && cubes == 3;
    outcome(same, format!("{} files compared ({cubes} cubes, CSV and traces), identical: {}", x.len(), x == y))
}

fn c12_io() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut r = rng(1212);
    let mut checks = Vec::new();

    let cube = random_cube(&mut r, 8, 8, 3);
    io::save_cube(&cube, d.join("c.srec")).unwrap();
    let back = io::load_cube(d.join("c.srec")).unwrap();
    io::save_cube(&back, d.join("c2.srec")).unwrap();
    let exact = cube.data().iter().zip(back.data()).all(|(a, b)| (*a as f32).to_bits() == (*b as f32).to_bits());
    checks.push(("cube", exact && fs::read(d.join("c.srec")).unwrap() == fs::read(d.join("c2.srec")).unwrap()));

    let img = Image2D::new(5, 7, (0..35).map(|_| r.gen_range(-3.0..3.0)).collect()).unwrap();
    io::save_image(&img, d.join("i.srec")).unwrap();
    let back = io::load_image(d.join("i.srec")).unwrap();
    io::save_image(&back, d.join("i2.srec")).unwrap();
    checks.push(("image", fs::read(d.join("i.srec")).unwrap() == fs::read(d.join("i2.srec")).unwrap()));

    let mask = generate_mask(9, 4, 5, 0.5).unwrap();
    io::save_mask(&mask, d.join("m.srec")).unwrap();
    checks.push(("mask", io::load_mask(d.join("m.srec")).unwrap() == io::MaskFile::Base(mask.clone())));
    let system = build_system(&mask, 3, 1).unwrap();
    io::save_system(&system, d.join("s.srec")).unwrap();
    checks.push(("system", io::load_mask(d.join("s.srec")).unwrap() == io::MaskFile::System(system)));

    let dict = ConvDictionary::dct(3);
    io::save_dictionary(&dict, d.join("d.srec")).unwrap();
    let loaded = io::load_dictionary(d.join("d.srec")).unwrap();
    io::save_dictionary(&loaded, d.join("d2.srec")).unwrap();
    let reread = io::load_dictionary(d.join("d2.srec")).unwrap();
    checks.push(("dict", loaded == reread));

    let raw = io::RawContainer::read(d.join("c.srec")).unwrap();
    checks.push(("raw", raw.to_bytes() == fs::read(d.join("c.srec")).unwrap()));

    let cave = d.join("cave");
    fs::create_dir(&cave).unwrap();
    let band0: Vec<u16> = (0..16).map(|i| i * 4096).collect();
    let band1: Vec<u16> = (0..16).map(|i| 65535 - i * 17).collect();
    // written out of order on purpose; loading sorts by name
    io::write_gray16(cave.join("scene_ms_02.png"), 4, 4, &band1).unwrap();
    io::write_gray16(cave.join("scene_ms_01.png"), 4, 4, &band0).unwrap();
    let loaded = io::load_cube_dir(&cave).unwrap();
    let scaled = (0..16).all(|i| {
        loaded.band(0)[i] == f64::from(band0[i]) / 65535.0 && loaded.band(1)[i] == f64::from(band1[i]) / 65535.0
    });
    checks.push((
        "cave",
        (loaded.width(), loaded.height(), loaded.bands()) == (4, 4, 2) && scaled,
    ));

    let pass = checks.iter().all(|(_, ok)| *ok);
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    outcome(
        pass,
        if pass {
            format!("{} round-trips exact; 2-band PNG directory -> 4x4x2 with /65535 scaling", checks.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // libtest-style flags (e.g. --list from tooling) are accepted and ignored
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }

    let tmp = tempfile::tempdir().unwrap();
    let mut results: Vec<(u32, &str, Duration, Option<f64>, Outcome)> = Vec::new();
    let mut timed = |n: u32, name: &'static str, limit: Option<f64>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        results.push((n, name, start.elapsed(), limit, o));
    };

    timed(1, "adjoint identity", Some(1.0), &mut c1_adjoint);
    timed(2, "GAP projection exactness", Some(1.0), &mut c2_projection);
    timed(3, "rank-1 solver oracle", Some(1.0), &mut c3_rank1);
    timed(4, "prox oracle", Some(1.0), &mut c4_prox);
    timed(5, "convolution oracle", Some(1.0), &mut c5_convolution);
    timed(6, "TV monotonicity", Some(5.0), &mut c6_tv);
    timed(7, "trivial-inversion recovery", Some(5.0), &mut c7_trivial);

    let first = run_compare(&tmp.path().join("run1"));
    timed(8, "method ordering at desk scale", None, &mut || c8_ordering(&first));
    timed(9, "ADMM residual behavior", None, &mut || c9_residuals(&first));
    timed(10, "metric self-tests", None, &mut c10_metrics);
    let second = run_compare(&tmp.path().join("run2"));
    timed(11, "determinism of compare", None, &mut || c11_determinism(&first, &second));
    timed(12, "IO round-trips", None, &mut c12_io);

    let mut failed = Vec::new();
    for (n, name, elapsed, limit, o) in &results {
        let secs = elapsed.as_secs_f64();
        let in_time = limit.map_or(true, |l| secs < l);
        let pass = o.pass && in_time;
        if !pass {
            failed.push(*n);
        }
        let budget = limit.map(|l| format!(", limit {l} s")).unwrap_or_default();
        println!(
            "criterion {n:2} {}: {name} -- {} [{secs:.3} s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {failed:?}")
        }
    );
    let strict = std::env::var("SPECREC_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
