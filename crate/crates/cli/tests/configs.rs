use calabi_lab_cli::{config, registry};

#[test]
fn shipped_configs_resolve_and_validate() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let raw = std::fs::read_to_string(&path).unwrap();
        let cfg = config::resolve(&raw, &[]).unwrap();
        let exp = registry::find(&cfg.experiment).unwrap();
        cfg.validate(exp.default_exponents, exp.default_kind).unwrap();
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), cfg.experiment);
        seen += 1;
    }
    assert!(seen >= 3);
}
