use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bloch-cavity"));
    c.env_remove("BLOCH_CAVITY_OUT").env_remove("BLOCH_CAVITY_THREADS").env("RUST_LOG", "warn");
    c
}

/// A packet narrow enough for a 64-site box; 7 periods leave 6 after the transient.
fn small_config(extra_physical: &str, sweep: &str) -> String {
    format!(
        r#"
[physical]
bloch_frequency_hz = 744.5
cavity_decay_hz = 1000.0
light_shift_hz = -1.0
atom_number = 1000.0
wavelength_nm = 689.0
atom_mass_amu = 87.9056122571
target_depth = -3.0
atomic_linewidth_hz = 7600.0
atom_detuning_hz = -10000000.0
{extra_physical}

[numerics]
box_sites = 64
periods = 7.0

[scenario]
initial_state = {{ kind = "delocalized", center_site = 0, width_sites = 4.0 }}
model = "both"
{sweep}
"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn first_data_row(path: &Path) -> (String, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    let header = rows.next().unwrap().to_string();
    (header, rows.map(str::to_string).collect())
}

#[test]
fn list_presets_names_every_preset() {
    let out = bin().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig2a_uphill", "fig2a_downhill", "fig2b_breathing", "fig4", "fig5_sweep", "static_control"] {
        assert!(text.contains(name), "{name} missing from {text}");
    }
}

#[test]
fn empty_config_exits_with_code_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "empty.toml", "");
    let out = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("empty.toml"), "{err}");
}

#[test]
fn unknown_key_and_bad_value_exit_with_code_2() {
    let dir = TempDir::new().unwrap();
    let typo = write(dir.path(), "typo.toml", &small_config("offset_kappa = 1.3\nbloch_freq = 1.0", ""));
    assert_eq!(bin().args(["validate", "--config"]).arg(&typo).status().unwrap().code(), Some(2));
    let shallow = write(
        dir.path(),
        "sign.toml",
        &small_config("offset_kappa = 1.3", "").replace("target_depth = -3.0", "target_depth = 3.0"),
    );
    let out = bin().args(["validate", "--config"]).arg(&shallow).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("target_depth"));
}

#[test]
fn validate_accepts_a_preset_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "p.toml", "[scenario]\npreset = \"fig5_sweep\"\n");
    let out = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("11 point(s)"));
}

#[test]
fn run_writes_every_file_and_reruns_identically_from_the_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.toml", &small_config("offset_kappa = 1.3", ""));
    let out1 = dir.path().join("first");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out1).status().unwrap();
    assert!(status.success());

    let (header, rows) = first_data_row(&out1.join("velocity.csv"));
    assert!(header.starts_with("delta0,v_numeric,v_analytic,P_plus,P_minus,loop_work"));
    assert_eq!(rows.len(), 1);
    let (header, _) = first_data_row(&out1.join("metrology.csv"));
    assert!(header.starts_with("tau,tau_sp,cooperativity,chi_prime"));
    let point = out1.join("offset_kappa_+1.300");
    let (header, rows) = first_data_row(&point.join("trace.csv"));
    assert_eq!(header, "t,re_alpha,im_alpha,n_photons,C,centroid,force,depth,norm");
    assert_eq!(rows.len(), 7 * 64 + 1);
    let (header, _) = first_data_row(&point.join("ladder_trace.csv"));
    assert!(header.starts_with("t,n_M,re_bM,im_bM,re_delta_alpha,im_delta_alpha,delta_n"));
    assert_eq!(first_data_row(&point.join("spectrum.csv")).0, "freq,psd");
    assert_eq!(first_data_row(&point.join("loop.csv")).0, "t,centroid,force");
    let trace = fs::read_to_string(point.join("trace.csv")).unwrap();
    assert!(trace.starts_with("# point offset_kappa_+1.300\n# scaled: omega_B"));

    // The manifest names its own output directory; redirect it.
    let out2 = dir.path().join("second");
    let status = bin()
        .args(["run", "--config"])
        .arg(out1.join("manifest.toml"))
        .env("BLOCH_CAVITY_OUT", &out2)
        .status()
        .unwrap();
    assert!(status.success());
    for f in [
        "velocity.csv",
        "metrology.csv",
        "offset_kappa_+1.300/trace.csv",
        "offset_kappa_+1.300/ladder_trace.csv",
        "offset_kappa_+1.300/spectrum.csv",
        "offset_kappa_+1.300/loop.csv",
    ] {
        assert_eq!(fs::read(out1.join(f)).unwrap(), fs::read(out2.join(f)).unwrap(), "{f} differs");
    }
    let m1 = fs::read_to_string(out1.join("manifest.toml")).unwrap();
    let m2 = fs::read_to_string(out2.join("manifest.toml")).unwrap();
    let body = |m: &str| m.lines().filter(|l| !l.starts_with("dir")).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&m1), body(&m2));
}

#[test]
fn sweep_files_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let sweep = "[sweep]\nparameter = \"delta0_kappa\"\nvalues = [-1.0, 0.5]\n";
    let cfg = write(dir.path(), "sweep.toml", &small_config("delta0_kappa = 0.0", sweep));
    let mut files = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("t{threads}"));
        let status = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .env("BLOCH_CAVITY_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        files.push(fs::read(out.join("velocity.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files.remove(0)).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("-1,") && rows[1].starts_with("0.5,"), "{rows:?}");
}

#[test]
fn zero_light_shift_is_a_static_run_without_drift() {
    let dir = TempDir::new().unwrap();
    let text = small_config("offset_kappa = 1.3", "").replace("light_shift_hz = -1.0", "light_shift_hz = 0.0");
    let cfg = write(dir.path(), "static.toml", &text);
    let out = dir.path().join("out");
    assert!(bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let (header, rows) = first_data_row(&out.join("velocity.csv"));
    let cols: Vec<&str> = header.split(',').collect();
    let vals: Vec<&str> = rows[0].split(',').collect();
    let get = |name: &str| vals[cols.iter().position(|c| *c == name).unwrap()];
    let v: f64 = get("v_numeric").parse().unwrap();
    assert!(v.abs() < 1e-4, "static drift {v}");
    // No backaction: no closed form and no ladder run.
    assert_eq!(get("v_analytic"), "");
    assert!(!out.join("offset_kappa_+1.300/ladder_trace.csv").exists());
}
