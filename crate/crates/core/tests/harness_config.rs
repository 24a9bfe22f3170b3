use prodmc::harness::config::*;
use prodmc::stats::BatchScheme;

#[test]
fn schedules() {
    assert_eq!(parse_r_schedule("5000:20000:5000").unwrap(), vec![5000, 10000, 15000, 20000]);
    assert_eq!(parse_r_schedule("300").unwrap(), vec![300]);
    assert!(parse_r_schedule("0:10:1").is_err());
    assert!(parse_r_schedule("10:5:1").is_err());
    assert!(parse_r_schedule("a:b:c").is_err());
}

#[test]
fn file_wins_with_warning() {
    let cli = Settings {
        seed: Some(1),
        n: Some(50),
        ..Default::default()
    };
    let file = Settings::from_toml_str("seed = 7\nalpha = 0.1\n").unwrap();
    let (m, w) = Settings::merge(&cli, &file);
    assert_eq!(m.seed, Some(7));
    assert_eq!(m.n, Some(50));
    assert_eq!(m.alpha, Some(0.1));
    assert_eq!(w.len(), 1);
    assert!(w[0].contains("seed"));
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    assert!(Settings::from_toml_str("sed = 1").is_err());
    let s = Settings {
        alpha: Some(-1.0),
        ..Default::default()
    };
    let e = BetaConfig::from_settings(&s).unwrap_err();
    assert!(e.to_string().contains("alpha"), "{e}");
    let s = Settings {
        k: Some(7),
        ..Default::default()
    };
    assert!(GllvmConfig::from_settings(&s).is_err());
    let s = Settings {
        batches: Some(50),
        batch_size: Some(1000),
        ..Default::default()
    };
    assert!(GllvmConfig::from_settings(&s).is_err());
}

#[test]
fn desk_defaults() {
    let g = GllvmConfig::from_settings(&Settings::default()).unwrap();
    assert_eq!(g.scheme, BatchScheme::new(25, 200).unwrap());
    assert_eq!(g.mwg(0).unwrap().kept(), 5000);
}
