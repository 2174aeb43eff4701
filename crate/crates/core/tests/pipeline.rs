use kde_edof::data::io::{faithful_waiting, load_sample};
use kde_edof::edof::{edof_report, nu_hat_plugin};
use kde_edof::experiments::{replicate, Experiment, ExperimentSpec};
use kde_edof::kernels::SmoothedDensity;
use kde_edof::{Error, Kernel, OracleDensity, QuadSpec, RngStream};

#[test]
fn load_sample_reads_files_and_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.txt");
    std::fs::write(&p, "# waiting\n1.5\n2.5\n\n3.5\n").unwrap();
    let s = load_sample(p.to_str().unwrap()).unwrap();
    assert_eq!(s.values(), &[1.5, 2.5, 3.5]);
    assert_eq!(load_sample("builtin:faithful").unwrap().n(), 272);
    assert!(matches!(load_sample("/no/such/file"), Err(Error::Io(_))));
    std::fs::write(&p, "1\nabc\n").unwrap();
    assert!(matches!(load_sample(p.to_str().unwrap()), Err(Error::Load { line: 2, .. })));
}

#[test]
fn report_with_oracle_matches_all_gaussian_values() {
    let d = OracleDensity::standard_normal();
    let s = d.sample_from(1000, &RngStream::new(3, 0)).unwrap();
    let k = Kernel::gaussian(2.0).unwrap();
    let r = edof_report(&k, &s, Some(&d), &QuadSpec::default()).unwrap();
    assert!((r.nu_oracle.unwrap() - 0.25).abs() < 1e-8);
    assert!((r.omega2.unwrap() - 0.16841).abs() < 1e-4);
    assert!((r.nu_hat - 0.25).abs() < 0.05, "{}", r.nu_hat);
    assert!((r.theta_hat - 1.0 - r.nu_hat).abs() < 1e-15);
}

#[test]
fn kde_integrates_to_one_for_every_family() {
    let spec = QuadSpec::default();
    let s = faithful_waiting();
    let (lo, hi) = (s.min(), s.max());
    let s = s.restricted(lo, hi).unwrap();
    for k in [Kernel::gaussian(3.0).unwrap(), Kernel::diffusion(3.0, lo, hi).unwrap(), Kernel::equal_bins(lo, hi, 12).unwrap()] {
        let m = SmoothedDensity::empirical(&k, &s).unwrap().integrate_pdf(&spec).unwrap();
        assert!((m - 1.0).abs() < 1e-6, "{:?} {m}", k.family());
    }
}

#[test]
fn table1_replicate_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::new(Experiment::Table1, 3);
    let out = replicate(&spec, dir.path()).unwrap();
    assert_eq!(out.manifest["schema"], 1);
    let csv = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 7);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "table1");
}

#[test]
fn small_bandwidth_edof_grows() {
    let s = faithful_waiting();
    let spec = QuadSpec::default();
    let hs = [1.0, 2.0, 4.0, 8.0];
    let nus: Vec<f64> = hs.iter().map(|&h| nu_hat_plugin(&Kernel::gaussian(h).unwrap(), &s, &spec).unwrap()).collect();
    assert!(nus.windows(2).all(|w| w[1] < w[0]), "{nus:?}");
}
