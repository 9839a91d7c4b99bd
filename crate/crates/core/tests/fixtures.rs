use std::path::PathBuf;

use ies_core::data::StorageKind;
use ies_core::io::{load_scenario, parse_manifest, write_outputs};
use ies_core::scenario::{reference_config, run_mode, RunOptions};

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/manifest.ini")
}

#[test]
fn bundled_tables_match_reference() {
    let (cfg, settings) = load_scenario(&manifest()).unwrap();
    assert_eq!(cfg, reference_config());
    assert_eq!(settings.perturbations, 50);
    assert!(parse_manifest(&manifest()).unwrap().raw("units", "pv_area").is_some());
}

#[test]
fn thermal_units_table() {
    let (cfg, _) = load_scenario(&manifest()).unwrap();
    let a: Vec<f64> = cfg.thermal.iter().map(|u| u.cost_a).collect();
    assert_eq!(a, vec![0.012, 0.069, 0.028, 0.010]);
    let pmax: Vec<f64> = cfg.thermal.iter().map(|u| u.p_max).collect();
    assert_eq!(pmax, vec![50.0, 35.0, 30.0, 40.0]);
}

#[test]
fn chp_and_storage_tables() {
    let (cfg, _) = load_scenario(&manifest()).unwrap();
    assert_eq!(cfg.chp.len(), 2);
    assert!(cfg.chp.iter().all(|u| u.cv_ratio == 0.15 && u.cost_a == 0.0044 && u.cost_b == 13.29 && u.cost_c == 39.0));
    let es = cfg.storages.iter().find(|s| s.kind == StorageKind::Electric).unwrap();
    assert_eq!((es.charge_max, es.soc_min, es.soc_max, es.eta_charge), (40.0, 32.0, 160.0, 0.9));
    let wind = &cfg.renewables[0];
    assert_eq!((wind.cut_in, wind.rated_speed, wind.cut_out, wind.rated_power), (3.0, 15.0, 25.0, 60.0));
    assert_eq!(cfg.renewables[1].rated_power, 120.0);
}

#[test]
fn outputs_are_reproducible() {
    let cfg = reference_config();
    let opts = RunOptions { n_perturb: 5, ..RunOptions::default() };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run_mode(&cfg, 2, &opts).unwrap();
        write_outputs(&cfg, &o, dir.path()).unwrap();
    }
    for f in ["schedule.csv", "summary.csv", "plot_load.csv", "plot_cuts.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let schedule = std::fs::read_to_string(a.path().join("schedule.csv")).unwrap();
    assert_eq!(schedule.lines().count(), cfg.horizon + 1);
    let mut rdr = csv::Reader::from_path(a.path().join("summary.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let col = headers.iter().position(|h| h == "comfort_loss").unwrap();
    assert_eq!(row[col].parse::<f64>().unwrap(), 0.0);
    let mut sched = csv::Reader::from_path(a.path().join("schedule.csv")).unwrap();
    for rec in sched.records() {
        assert!(rec.unwrap().iter().all(|c| c.parse::<f64>().is_ok()));
    }
}
