//! Subcommand implementations. Every command writes its artifacts plus a JSON
//! manifest into the output directory and exits nonzero on failure.

use crate::config::RunConfig;
use crate::manifest::RunManifest;
use anyhow::{bail, Context as _, Result};
use mpm_core::geometry::{rasterize, GridField};
use mpm_core::materials::MaterialLibrary;
use mpm_core::modes::{solve_modes_with_diagnostics, ModeLabel};
use mpm_core::nonlinear;
use mpm_core::phase_matching::{self, MpmSolveOptions};
use mpm_core::photon_stats;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct Context {
    pub config: RunConfig,
    pub library: MaterialLibrary,
    pub verbose: bool,
}

impl Context {
    fn out(&self) -> &Path {
        &self.config.io.out_dir
    }

    fn mpm_opts(&self, spacing_nm: f64) -> MpmSolveOptions {
        MpmSolveOptions {
            spacing_nm,
            pump_mode_count: self.config.solver.pump_mode_count,
            signal_mode_count: self.config.solver.signal_mode_count,
            cache_dir: self.config.cache_dir(),
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

pub fn materials(ctx: &Context) -> Result<()> {
    let mut manifest = RunManifest::new("materials", &ctx.config, None, f64::NAN);
    let t0 = Instant::now();
    let mut csv = String::from("material,wavelength_um,n\n");
    for name in ctx.library.names() {
        let m = ctx.library.get(name)?;
        let (lo, hi) = m.valid_range_um;
        let lo = lo.max(0.35);
        let hi = hi.min(5.2);
        let steps = 500;
        for k in 0..=steps {
            let lam = lo + (hi - lo) * k as f64 / steps as f64;
            let n = m.refractive_index(lam).map_err(anyhow::Error::from)?;
            csv.push_str(&format!("{name},{lam},{n}\n"));
        }
    }
    let path = ctx.out().join("materials.csv");
    write_file(&path, &csv)?;
    manifest.record_artifact(&path);
    manifest.record_timing("tabulate", t0.elapsed().as_millis());
    manifest.write(ctx.out())?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn modes(
    ctx: &Context,
    wavelength: Option<f64>,
    count: Option<usize>,
    fields: bool,
) -> Result<()> {
    let spacing = ctx.config.solver.spacing_nm;
    let mut manifest = RunManifest::new("modes", &ctx.config, None, spacing);
    let lambda = wavelength.unwrap_or(ctx.config.sweep.signal_wavelength_um);
    let count = count.unwrap_or(ctx.config.solver.signal_mode_count);
    let geometry = ctx.config.geometry(&ctx.library)?;

    let t0 = Instant::now();
    let grid = rasterize(&geometry, spacing, lambda).map_err(anyhow::Error::from)?;
    let (solved, diag) =
        solve_modes_with_diagnostics(&grid, lambda, count, grid.n_max).map_err(anyhow::Error::from)?;
    manifest.record_timing("solve", t0.elapsed().as_millis());
    if ctx.verbose {
        eprintln!(
            "solver: {} unknowns, {} sweeps, {} matvecs, worst residual {:.2e}",
            diag.unknowns, diag.sweeps, diag.matvecs, diag.worst_residual
        );
    }

    let mut csv = String::from("index,n_eff,label,polarization_fraction,effective_area_um2,residual\n");
    for (i, m) in solved.iter().enumerate() {
        csv.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            m.n_eff, m.label, m.polarization_fraction, m.effective_area_um2, m.residual
        ));
    }
    let path = ctx.out().join("modes.csv");
    write_file(&path, &csv)?;
    manifest.record_artifact(&path);

    for (name, field) in [
        ("permittivity.csv", GridField::Permittivity),
        ("nonlinearity.csv", GridField::NonlinearitySign),
    ] {
        let path = ctx.out().join(name);
        let mut buf = Vec::new();
        grid.write_csv(field, &mut buf)?;
        std::fs::write(&path, buf)?;
        manifest.record_artifact(&path);
    }
    if fields {
        for (i, m) in solved.iter().enumerate() {
            let path = ctx.out().join(format!("mode_{i}_{}.csv", m.label));
            let mut text = String::new();
            for j in (0..m.field.nrows()).rev() {
                for i2 in 0..m.field.ncols() {
                    if i2 > 0 {
                        text.push(',');
                    }
                    text.push_str(&m.field[[j, i2]].to_string());
                }
                text.push('\n');
            }
            write_file(&path, &text)?;
            manifest.record_artifact(&path);
        }
    }
    manifest.write(ctx.out())?;
    for m in &solved {
        println!(
            "{}  n_eff = {:.6}  pol = {:.3}  A_eff = {:.4} um^2",
            m.label, m.n_eff, m.polarization_fraction, m.effective_area_um2
        );
    }
    Ok(())
}

pub fn pm_sweep(ctx: &Context) -> Result<()> {
    let sweep = &ctx.config.sweep;
    let mut manifest = RunManifest::new("pm-sweep", &ctx.config, None, sweep.spacing_nm);
    let geometry = ctx.config.geometry(&ctx.library)?;
    let opts = ctx.mpm_opts(sweep.spacing_nm);
    let t0 = Instant::now();
    let points = phase_matching::landscape_sweep(
        &geometry,
        sweep.signal_wavelength_um,
        sweep.w_range_um,
        sweep.h1_range_nm,
        sweep.w_samples,
        sweep.h1_samples,
        &opts,
    );
    manifest.record_timing("sweep", t0.elapsed().as_millis());
    let mut csv = String::from("w_um,h1_nm,neff_te00_signal,neff_te01_pump\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            p.top_width_um,
            p.etch_depth_nm,
            p.neff_te00_signal.map_or(String::new(), |v| v.to_string()),
            p.neff_te01_pump.map_or(String::new(), |v| v.to_string()),
        ));
    }
    let path = ctx.out().join("pm_sweep.csv");
    write_file(&path, &csv)?;
    manifest.record_artifact(&path);
    manifest.write(ctx.out())?;
    println!("wrote {} ({} points)", path.display(), points.len());
    Ok(())
}

pub fn pm_curve(ctx: &Context) -> Result<()> {
    let sweep = &ctx.config.sweep;
    let mut manifest = RunManifest::new("pm-curve", &ctx.config, None, sweep.spacing_nm);
    let base = ctx.config.geometry(&ctx.library)?;
    let opts = ctx.mpm_opts(sweep.spacing_nm);
    let t0 = Instant::now();
    let mut csv = String::from("w_um,pump_wavelength_um\n");
    let mut found = 0;
    for iw in 0..sweep.w_samples {
        let w = if sweep.w_samples <= 1 {
            sweep.w_range_um.0
        } else {
            sweep.w_range_um.0
                + (sweep.w_range_um.1 - sweep.w_range_um.0) * iw as f64
                    / (sweep.w_samples - 1) as f64
        };
        let mut g = base.clone();
        g.top_width_um = w;
        match phase_matching::mpm_pump_wavelength(&g, sweep.pump_search_range_um, &opts) {
            Ok(lp) => {
                csv.push_str(&format!("{w},{lp}\n"));
                found += 1;
            }
            Err(e) => {
                if ctx.verbose {
                    eprintln!("w = {w}: {e}");
                }
                csv.push_str(&format!("{w},\n"));
            }
        }
    }
    manifest.record_timing("curve", t0.elapsed().as_millis());
    let path = ctx.out().join("pm_curve.csv");
    write_file(&path, &csv)?;
    manifest.record_artifact(&path);
    manifest.write(ctx.out())?;
    println!("wrote {} ({found} matched points)", path.display());
    Ok(())
}

pub fn overlap(ctx: &Context) -> Result<()> {
    let spacing = ctx.config.solver.spacing_nm;
    let mut manifest = RunManifest::new("overlap", &ctx.config, None, spacing);
    let geometry = ctx.config.geometry(&ctx.library)?;
    let lambda_s = ctx.config.sweep.signal_wavelength_um;
    let lambda_p = lambda_s / 2.0;

    let t0 = Instant::now();
    let grid_s = rasterize(&geometry, spacing, lambda_s).map_err(anyhow::Error::from)?;
    let (modes_s, diag_s) = solve_modes_with_diagnostics(
        &grid_s,
        lambda_s,
        ctx.config.solver.signal_mode_count,
        grid_s.n_max,
    )
    .map_err(anyhow::Error::from)?;
    let grid_p = rasterize(&geometry, spacing, lambda_p).map_err(anyhow::Error::from)?;
    let (modes_p, diag_p) = solve_modes_with_diagnostics(
        &grid_p,
        lambda_p,
        ctx.config.solver.pump_mode_count,
        grid_p.n_max,
    )
    .map_err(anyhow::Error::from)?;
    manifest.record_timing("solves", t0.elapsed().as_millis());
    if ctx.verbose {
        eprintln!(
            "signal solve: {} sweeps, residual {:.2e}; pump solve: {} sweeps, residual {:.2e}",
            diag_s.sweeps, diag_s.worst_residual, diag_p.sweeps, diag_p.worst_residual
        );
    }

    let te00 = modes_s
        .iter()
        .find(|m| m.label == ModeLabel::Te00)
        .context("no TE00 mode at the signal wavelength")?;
    let te01 = modes_p
        .iter()
        .find(|m| m.label == ModeLabel::Te01)
        .context("no TE01 mode at the pump wavelength")?;

    let dnor = grid_s.nonlinearity_profile();
    let dual = nonlinear::overlap_factor(te00, te01, &dnor).map_err(anyhow::Error::from)?;
    let single =
        nonlinear::overlap_factor(te00, te01, &dnor.mapv(f64::abs)).map_err(anyhow::Error::from)?;
    let enhancement =
        nonlinear::enhancement_ratio(dual.zeta, single.zeta).map_err(anyhow::Error::from)?;
    let delta_k = mpm_core::phase_matching::phase_mismatch(
        (lambda_p, te01.n_eff),
        (lambda_s, te00.n_eff),
        (lambda_s, te00.n_eff),
    )
    .map_err(anyhow::Error::from)?;
    let shg = nonlinear::predict_shg_efficiency(te00, te01, dual.zeta, lambda_s);
    let pgr = nonlinear::predict_relative_pgr(
        geometry.length_mm,
        1.0,
        mpm_core::materials::NonlinearCoefficients::LITHIUM_NIOBATE
            .d33_pm_per_v
            .abs(),
        dual.zeta,
        te00.effective_area_um2,
        delta_k,
    );

    let report = serde_json::json!({
        "geometry": { "top_width_um": geometry.top_width_um, "etch_depth_nm": geometry.etch_depth_nm },
        "spacing_nm": spacing,
        "signal": { "wavelength_um": lambda_s, "n_eff": te00.n_eff,
                    "effective_area_um2": te00.effective_area_um2 },
        "pump": { "wavelength_um": lambda_p, "n_eff": te01.n_eff,
                  "effective_area_um2": te01.effective_area_um2 },
        "delta_k_rad_per_um": delta_k,
        "dual_layer": dual,
        "single_layer": single,
        "enhancement": enhancement,
        "predicted_shg_percent_per_w_cm2": shg,
        "relative_pgr_at_1mW": pgr,
        "pgr_calibration_ghz_per_mw": nonlinear::PGR_CALIBRATION_GHZ_PER_MW,
    });
    let path = ctx.out().join("overlap.json");
    write_file(&path, &serde_json::to_string_pretty(&report)?)?;
    manifest.record_artifact(&path);
    manifest.write(ctx.out())?;

    println!("zeta (dual layer)   = {:+.4}", dual.zeta);
    println!(
        "  numerator = {:+.5e}, |I3_s|^(2/3) = {:.5e}, |I3_p|^(1/3) = {:.5e}",
        dual.numerator, dual.denominator_signal, dual.denominator_pump
    );
    println!("zeta (single layer) = {:+.4}", single.zeta);
    println!(
        "  numerator = {:+.5e}, |I3_s|^(2/3) = {:.5e}, |I3_p|^(1/3) = {:.5e}",
        single.numerator, single.denominator_signal, single.denominator_pump
    );
    println!("enhancement (zeta_d/zeta_s)^2 = {enhancement:.2}");
    println!("predicted SHG efficiency = {shg:.0} %/W/cm^2");
    Ok(())
}

pub fn shg(
    ctx: &Context,
    input: &Path,
    t_sh: f64,
    t_fh: f64,
    length_cm: f64,
    loss_db_per_cm: Option<f64>,
) -> Result<()> {
    if !(t_sh > 0.0 && t_sh <= 1.0 && t_fh > 0.0 && t_fh <= 1.0) {
        bail!("transmissivities must lie in (0, 1]");
    }
    if length_cm <= 0.0 {
        bail!("length must be positive");
    }
    let mut manifest = RunManifest::new("shg", &ctx.config, None, f64::NAN);
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let effective_length = match loss_db_per_cm {
        None => length_cm,
        Some(alpha) => {
            // effective interaction length under exponential pump attenuation
            let a = alpha * std::f64::consts::LN_10 / 10.0;
            (1.0 - (-a * length_cm).exp()) / a
        }
    };
    let mut csv = String::from("lambda_fh_um,eta_percent_per_w_cm2\n");
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("lambda") || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            bail!(
                "{}:{}: expected lambda_fh_um,p_fh_w,p_sh_w",
                input.display(),
                lineno + 1
            );
        }
        let lam: f64 = parts[0].parse().context("bad wavelength")?;
        let p_fh: f64 = parts[1].parse().context("bad FH power")?;
        let p_sh: f64 = parts[2].parse().context("bad SH power")?;
        let eta = nonlinear::shg_normalized_efficiency_from_measurement(
            p_sh,
            p_fh,
            t_sh,
            t_fh,
            effective_length,
        );
        csv.push_str(&format!("{lam},{eta}\n"));
        rows += 1;
    }
    let path = ctx.out().join("shg.csv");
    write_file(&path, &csv)?;
    manifest.record_artifact(&path);
    manifest.write(ctx.out())?;
    println!("wrote {} ({rows} rows)", path.display());
    Ok(())
}

pub fn spdc_sim(ctx: &Context, csv: bool) -> Result<()> {
    let spec = ctx.config.detection_spec()?;
    let mut manifest = RunManifest::new(
        "spdc-sim",
        &ctx.config,
        Some(spec.rng_seed),
        f64::NAN,
    );
    let t0 = Instant::now();
    let stream = photon_stats::simulate_timetags(&spec).map_err(anyhow::Error::from)?;
    manifest.record_timing("simulate", t0.elapsed().as_millis());
    let path = ctx.out().join("spdc.ttag");
    let file = File::create(&path)?;
    photon_stats::write_binary(&stream, BufWriter::new(file)).map_err(anyhow::Error::from)?;
    manifest.record_artifact(&path);
    if csv {
        let cpath = ctx.out().join("spdc.csv");
        let file = File::create(&cpath)?;
        photon_stats::write_csv(&stream, BufWriter::new(file)).map_err(anyhow::Error::from)?;
        manifest.record_artifact(&cpath);
    }
    manifest.write(ctx.out())?;
    println!(
        "wrote {} ({} events, {} channels, {} s)",
        path.display(),
        stream.len(),
        stream.channel_count(),
        stream.duration_s
    );
    Ok(())
}

pub fn analyze(ctx: &Context, input: &Path, span_ps: Option<u64>) -> Result<()> {
    let spec = &ctx.config.spdc;
    let mut manifest = RunManifest::new("analyze", &ctx.config, None, f64::NAN);
    let stream = read_stream(input)?;
    let span = span_ps.unwrap_or(spec.histogram_span_ps);
    let t0 = Instant::now();
    let report = photon_stats::analyze(
        &stream,
        spec.coincidence_window_ps,
        spec.histogram_bin_ps,
        span,
    )
    .map_err(anyhow::Error::from)?;
    manifest.record_timing("analyze", t0.elapsed().as_millis());
    let path = ctx.out().join("report.json");
    write_file(&path, &serde_json::to_string_pretty(&report)?)?;
    manifest.record_artifact(&path);
    manifest.write(ctx.out())?;

    let mut out = String::new();
    for (i, s) in report.singles_hz.iter().enumerate() {
        out.push_str(&format!(
            "singles[{}] = {:.1} ± {:.1} Hz\n",
            stream.channel_labels.get(i).map_or("?", |s| s.as_str()),
            s.value,
            s.sigma
        ));
    }
    for (a, b, c) in &report.pair_coincidences_hz {
        out.push_str(&format!("C({a},{b}) = {:.2} ± {:.2} Hz\n", c.value, c.sigma));
    }
    if let Some(p) = &report.pgr {
        out.push_str(&format!("PGR = {:.3e} ± {:.1e} Hz\n", p.value, p.sigma));
    }
    if let Some(c) = &report.car {
        out.push_str(&format!("CAR = {:.1} ± {:.1}\n", c.value, c.sigma));
    }
    if let Some(g) = &report.g2_heralded {
        out.push_str(&format!(
            "g2_H(0) = {:.4} ± {:.4} (conventional {:.4} ± {:.4}), heralded rate {:.1} Hz\n",
            g.paper.value,
            g.paper.sigma,
            g.conventional.value,
            g.conventional.sigma,
            g.heralded_rate_hz.value
        ));
    }
    print!("{out}");
    std::io::stdout().flush()?;
    Ok(())
}

fn read_stream(input: &Path) -> Result<photon_stats::TimeTagStream> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let mut reader = BufReader::new(file);
    if input.extension().and_then(|e| e.to_str()) == Some("csv") {
        return photon_stats::read_csv(reader, None).map_err(anyhow::Error::from);
    }
    // sniff the magic, fall back to CSV
    use std::io::{Read, Seek, SeekFrom};
    let mut magic = [0u8; 4];
    if reader.read_exact(&mut magic).is_ok() && magic == photon_stats::MAGIC {
        reader.seek(SeekFrom::Start(0))?;
        photon_stats::read_binary(reader).map_err(anyhow::Error::from)
    } else {
        reader.seek(SeekFrom::Start(0))?;
        photon_stats::read_csv(reader, None).map_err(anyhow::Error::from)
    }
}

pub use analyze_helpers::*;
mod analyze_helpers {
    pub(super) type PathBufAlias = super::PathBuf;
}
