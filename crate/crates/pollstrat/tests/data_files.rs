//! The JSON files shipped under data/ must stay loadable and in sync with the
//! built-in defaults.

use std::path::PathBuf;

use pollstrat::attrs::{StateColor, StateColorMap, SWING_STATES};
use pollstrat::core_model::DimensionRegistry;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .canonicalize()
        .expect("data directory exists")
}

#[test]
fn shipped_registry_matches_builtin_default() {
    let loaded = pollstrat::ingest::load_registry(&data_dir().join("registry.json")).unwrap();
    assert_eq!(loaded, DimensionRegistry::default_registry());
}

#[test]
fn shipped_color_map_prefills_all_swing_states() {
    let raw = std::fs::read_to_string(data_dir().join("state_colors.json")).unwrap();
    let map: StateColorMap = serde_json::from_str(&raw).unwrap();
    for state in SWING_STATES {
        assert_eq!(map.get(state), Some(&StateColor::Swing), "{state}");
    }
    assert_eq!(map.len(), SWING_STATES.len());
}
