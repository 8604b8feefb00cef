//! CSV and manifest files for a finished scenario.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.toml      resolved parameters as comments, then the loadable config
//! velocity.csv       one row per sweep point
//! metrology.csv      one row per sweep point
//! <label>/trace.csv, ladder_trace.csv, spectrum.csv, loop.csv
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so identical
//! reports give identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::meanfield::InitialState;
use crate::scenario::{PointResult, ScenarioReport};

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn csv_writer(path: &Path, comments: &[String]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut file = BufWriter::new(File::create(path)?);
    for c in comments {
        writeln!(file, "# {c}")?;
    }
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => std::io::Error::other(format!("{other:?}")).into(),
    }
}

fn scaled_echo(p: &PointResult) -> Vec<String> {
    let s = &p.setup.scaled;
    vec![
        format!("point {}", p.setup.label),
        format!(
            "scaled: omega_B {} kappa {} eta {} Delta_c {} u0 {} N {}",
            s.omega_b, s.kappa, s.eta, s.delta_c, s.u0, s.n_atoms
        ),
        format!("recoil frequency {} rad/s; times in 1/omega_r, lengths in 1/k", s.recoil_freq),
        format!("delta0 {} dt {} sample_stride {}", p.setup.delta0, p.dt, p.stride),
    ]
}

fn write_trace(dir: &Path, p: &PointResult) -> Result<()> {
    let Some(tr) = &p.trace else { return Ok(()) };
    let mut w = csv_writer(&dir.join("trace.csv"), &scaled_echo(p))?;
    w.write_record(["t", "re_alpha", "im_alpha", "n_photons", "C", "centroid", "force", "depth", "norm"])
        .map_err(csv_err)?;
    for i in 0..tr.len() {
        w.write_record([
            tr.times[i].to_string(),
            tr.alpha[i].re.to_string(),
            tr.alpha[i].im.to_string(),
            tr.n_photons[i].to_string(),
            tr.overlap[i].to_string(),
            tr.centroid[i].to_string(),
            tr.force[i].to_string(),
            tr.depth[i].to_string(),
            tr.norm[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_ladder(dir: &Path, p: &PointResult) -> Result<()> {
    let Some(lt) = &p.ladder_trace else { return Ok(()) };
    let mut w = csv_writer(&dir.join("ladder_trace.csv"), &scaled_echo(p))?;
    w.write_record(["t", "n_M", "re_bM", "im_bM", "re_delta_alpha", "im_delta_alpha", "delta_n", "centroid"])
        .map_err(csv_err)?;
    for i in 0..lt.len() {
        w.write_record([
            lt.times[i].to_string(),
            lt.n_m[i].to_string(),
            lt.b_m[i].re.to_string(),
            lt.b_m[i].im.to_string(),
            lt.delta_alpha[i].re.to_string(),
            lt.delta_alpha[i].im.to_string(),
            lt.delta_n[i].to_string(),
            lt.centroid[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_spectrum_and_loop(dir: &Path, p: &PointResult, t_start: f64) -> Result<()> {
    let (Some(full), Some(tr)) = (&p.full, &p.trace) else { return Ok(()) };
    let mut comments = scaled_echo(p);
    comments.push("freq is the offset from the pump in units of omega_r; a component e^{-i w t} appears at +w".into());
    let mut w = csv_writer(&dir.join("spectrum.csv"), &comments)?;
    w.write_record(["freq", "psd"]).map_err(csv_err)?;
    for (f, s) in full.spectrum.frequencies.iter().zip(&full.spectrum.psd) {
        w.write_record([f.to_string(), s.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;

    let period = 2.0 * std::f64::consts::PI / p.setup.scaled.omega_b;
    let t_loop = (t_start / period - 1e-9).ceil() * period;
    let mut comments = scaled_echo(p);
    comments.push(format!("whole Bloch periods after the transient, t >= {t_loop}"));
    let mut w = csv_writer(&dir.join("loop.csv"), &comments)?;
    w.write_record(["t", "centroid", "force"]).map_err(csv_err)?;
    for i in 0..tr.len() {
        if tr.times[i] >= t_loop - 1e-9 * period {
            w.write_record([tr.times[i].to_string(), tr.centroid[i].to_string(), tr.force[i].to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_velocity(out: &Path, report: &ScenarioReport) -> Result<()> {
    let comments = vec![
        "delta0 in units of kappa; velocities in lattice sites per Bloch period".to_string(),
        "v_analytic is the closed form in its detuning form; v_drift_c1 is 2*pi*c1/omega_B".to_string(),
        "loop_work is the mean of the integral of F d<z> per period, in recoil energies".to_string(),
    ];
    let mut w = csv_writer(&out.join("velocity.csv"), &comments)?;
    w.write_record([
        "delta0",
        "v_numeric",
        "v_analytic",
        "P_plus",
        "P_minus",
        "loop_work",
        "label",
        "v_numeric_stderr",
        "v_sideband_form",
        "v_drift_c1",
        "v_ladder",
        "sigma1",
        "u1_over_omega_B",
        "in_regime",
        "sidebands_resolved",
        "loop_area",
        "tilt_energy",
        "overlap_peak",
        "coherence_peak",
    ])
    .map_err(csv_err)?;
    for p in &report.points {
        let s = &p.setup.scaled;
        let a = p.analytic.as_ref();
        let f = p.full.as_ref();
        w.write_record([
            (p.setup.delta0 / s.kappa).to_string(),
            opt(f.map(|f| f.velocity.velocity)),
            opt(a.map(|a| a.v_detuning_form)),
            opt(f.map(|f| f.sidebands.plus)),
            opt(f.map(|f| f.sidebands.minus)),
            opt(f.map(|f| f.loop_work.mean_work())),
            p.setup.label.clone(),
            opt(f.map(|f| f.velocity.stderr)),
            opt(a.map(|a| a.v_sideband_form)),
            opt(a.map(|a| a.drift_from_c1)),
            opt(p.ladder.as_ref().map(|l| l.velocity.velocity)),
            p.sigma1.to_string(),
            opt(a.map(|a| a.u1 / s.omega_b)),
            a.map_or_else(String::new, |a| a.in_regime.to_string()),
            f.map_or_else(String::new, |f| f.sidebands.resolved.to_string()),
            opt(f.map(|f| f.loop_work.mean_area())),
            opt(f.map(|f| f.tilt_energy_per_period)),
            opt(f.map(|f| f.overlap_peak)),
            opt(p.ladder.as_ref().map(|l| l.coherence_peak)),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_metrology(out: &Path, report: &ScenarioReport) -> Result<()> {
    let comments = vec!["tau and tau_sp in seconds".to_string()];
    let mut w = csv_writer(&out.join("metrology.csv"), &comments)?;
    w.write_record([
        "tau",
        "tau_sp",
        "cooperativity",
        "chi_prime",
        "label",
        "enhancement",
        "wavelength_shift_fraction",
    ])
    .map_err(csv_err)?;
    for p in &report.points {
        let m = &p.metrology;
        w.write_record([
            m.coherence_time.to_string(),
            m.tau_sp.to_string(),
            m.cooperativity.to_string(),
            m.chi_prime.to_string(),
            p.setup.label.clone(),
            m.enhancement.to_string(),
            m.wavelength_shift_fraction.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_manifest(out: &Path, report: &ScenarioReport) -> Result<()> {
    let cfg = &report.config;
    let e = &report.elements;
    let mut text = String::new();
    let mut line = |s: String| {
        text.push_str("# ");
        text.push_str(&s);
        text.push('\n');
    };
    if let Some(p) = &cfg.scenario.preset {
        line(format!("preset {p}"));
    }
    line(format!(
        "basis at depth {}: gamma0 {} gamma1 {} Z0 {} Z1 {} e0 {}",
        cfg.physical.target_depth, e.gamma0, e.gamma1, e.z0, e.z1, report.e0
    ));
    if let InitialState::Delocalized { width_sites, .. } = cfg.scenario.initial_state {
        line(format!(
            "packet width {width_sites} sites is the 1/e full width of the Gaussian density envelope"
        ));
    }
    for p in &report.points {
        let s = &p.setup.scaled;
        line(format!(
            "{}: delta0/kappa {} eta {} Delta_c {} |alpha0|^2 {} sigma1 {} theta1 {} projection residual {}",
            p.setup.label,
            p.setup.delta0 / s.kappa,
            s.eta,
            s.delta_c,
            p.setup.alpha0.norm_sqr(),
            p.sigma1,
            p.theta1,
            p.projection_residual
        ));
        if let Some(tr) = &p.trace {
            line(format!("{}: largest edge density {}", p.setup.label, tr.max_edge_density));
        }
    }
    text.push('\n');
    text.push_str(&cfg.to_toml()?);
    fs::write(out.join("manifest.toml"), text)?;
    Ok(())
}

/// Write every file for `report` below `out` and return the per-point
/// directories.
pub fn write_report(out: &Path, report: &ScenarioReport) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    write_manifest(out, report)?;
    write_velocity(out, report)?;
    write_metrology(out, report)?;
    let mut dirs = Vec::new();
    for p in &report.points {
        let dir = out.join(&p.setup.label);
        fs::create_dir_all(&dir)?;
        let t_start = report.config.numerics.transient_kappa / p.setup.scaled.kappa;
        write_trace(&dir, p)?;
        write_ladder(&dir, p)?;
        write_spectrum_and_loop(&dir, p, t_start)?;
        dirs.push(dir);
    }
    Ok(dirs)
}
