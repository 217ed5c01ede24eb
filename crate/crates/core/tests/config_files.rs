use std::io::Write;

use hollowlink_core::config::*;

fn write(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn preset_with_overrides_from_disk() {
    let f = write("preset = paper-122km\nlength_km = 80  # [ASSUMED] shorter span\nseed = 12\nclock_offset_ps = 50\n");
    let c = load_config(f.path()).unwrap();
    assert_eq!(c.scenario.link.length_km, 80.0);
    assert_eq!(c.scenario.link.atten_db_per_km, 0.17);
    assert_eq!(c.run.seed, Some(12));
    assert_eq!(c.run.clock.offset_ps, 50.0);
    assert_eq!(c.provenance["length_km"], "[ASSUMED] shorter span");
    assert!(c.provenance["atten_db_per_km"].starts_with("[PAPER]"));
    let run = c.sim_run(999).unwrap();
    assert_eq!(run.seed, 12);
}

#[test]
fn every_preset_round_trips_through_a_file() {
    for p in PRESETS {
        let c = p.load().unwrap();
        let f = write(&to_config_string(&c));
        assert_eq!(load_config(f.path()).unwrap(), c, "{}", p.name);
    }
}

#[test]
fn errors_carry_line_numbers_and_keys() {
    let f = write("preset = next-gen\n\nlenght_km = 3\n");
    match load_config(f.path()) {
        Err(ConfigError::UnknownKey { line: 3, key }) => assert_eq!(key, "lenght_km"),
        other => panic!("{other:?}"),
    }
    let f = write("preset = next-gen\nwindow_ps = -5\n");
    assert!(matches!(load_config(f.path()), Err(ConfigError::UnitViolation { .. })));
    let f = write("preset = nope\n");
    assert!(matches!(load_config(f.path()), Err(ConfigError::UnknownPreset(_))));
    let missing = std::path::Path::new("/nonexistent/hollowlink.conf");
    assert!(matches!(load_config(missing), Err(ConfigError::Io { .. })));
}
