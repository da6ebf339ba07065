use std::path::Path;

use moveblock::harness::config::PENDULUM_GRID_42;
use moveblock::harness::{load_config, Scheme, SchemeConfig};

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn shipped_configs_parse_and_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            for scheme in [Scheme::A, Scheme::B, Scheme::C] {
                let applies = scheme != Scheme::C || cfg.block_lengths.iter().sum::<usize>() == cfg.horizon;
                if applies {
                    cfg.clone().with_scheme(scheme).validate().unwrap();
                }
            }
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn pendulum_config_spells_out_the_defaults() {
    let cfg = load_config(&configs_dir().join("pendulum.toml")).unwrap();
    let expected = SchemeConfig {
        block_indices: cfg.block_indices.clone(),
        ..SchemeConfig::default()
    };
    assert_eq!(cfg, expected);
}

#[test]
fn m42_grid_matches_constant() {
    let cfg = load_config(&configs_dir().join("scheme_b_m42.toml")).unwrap();
    assert_eq!(cfg.grid(), PENDULUM_GRID_42);
    assert_eq!(cfg.scheme, Scheme::B);
}
