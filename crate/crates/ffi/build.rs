use std::env;
use std::path::PathBuf;

use cbindgen::{Config, EnumConfig, Language, RenameRule, Style};

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("manifest dir"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");

    let config = Config {
        language: Language::C,
        include_guard: Some("SCUC_H".into()),
        cpp_compat: true,
        documentation: true,
        style: Style::Both,
        enumeration: EnumConfig {
            rename_variants: RenameRule::ScreamingSnakeCase,
            prefix_with_name: true,
            ..EnumConfig::default()
        },
        ..Config::default()
    };
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("unable to generate C bindings")
        .write_to_file(crate_dir.join("include/scuc.h"));
}
